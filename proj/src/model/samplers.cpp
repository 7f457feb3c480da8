#include "model/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace reca {

namespace {

void validate_settings(const SamplerSettings& s) {
    if (s.omega < 0)
        fail(Error::Kind::invalid_arg, "guidance weight must be non-negative, got " + std::to_string(s.omega));
    if (s.temperature < 0)
        fail(Error::Kind::invalid_arg, "temperature must be non-negative, got " + std::to_string(s.temperature));
    if (s.maskgit_steps < 1)
        fail(Error::Kind::invalid_arg, "maskgit_steps must be >= 1, got " + std::to_string(s.maskgit_steps));
    if (s.flow_steps < 1)
        fail(Error::Kind::invalid_arg, "flow_steps must be >= 1, got " + std::to_string(s.flow_steps));
}

int draw_categorical(const double* logits, int k, double temperature, Rng& rng) {
    if (temperature == 0.0) return argmax_lowest(logits, k);
    std::vector<double> p(logits, logits + k);
    for (double& x : p) x /= temperature;
    softmax_inplace(p);
    double u = rng.uniform(), cum = 0.0;
    for (int i = 0; i < k; ++i) {
        cum += p[i];
        if (u < cum) return i;
    }
    return k - 1;
}

} // namespace

std::vector<double> cfg_combine(const std::vector<double>& cond,
                                const std::vector<double>& uncond, double omega) {
    if (omega < 0)
        fail(Error::Kind::invalid_arg, "guidance weight must be non-negative, got " + std::to_string(omega));
    if (omega == 0.0) return cond;
    if (cond.size() != uncond.size())
        fail(Error::Kind::invalid_arg, "cfg_combine: conditional output has " + std::to_string(cond.size()) +
                                           " values, unconditional has " + std::to_string(uncond.size()));
    std::vector<double> out(cond.size());
    for (size_t i = 0; i < cond.size(); ++i) out[i] = cond[i] + omega * (cond[i] - uncond[i]);
    return out;
}

std::vector<int> maskgit_schedule(int n, int steps) {
    if (n < 1 || steps < 1)
        fail(Error::Kind::invalid_arg, "maskgit_schedule needs n >= 1 and steps >= 1");
    std::vector<int> out(steps);
    for (int t = 1; t <= steps; ++t)
        out[t - 1] = static_cast<int>(std::floor(n * std::cos(M_PI_2 * double(t) / steps)));
    out[steps - 1] = 0;  // cos(pi/2) up to rounding
    return out;
}

// ----- ar ---------------------------------------------------------------------

std::vector<int> sample_ar_tokens(Model& m, const Prefix& prefix, const SamplerSettings& s, Rng& rng) {
    if (m.cfg.paradigm != Paradigm::ar)
        fail(Error::Kind::invalid_arg, "sample_ar_tokens requires the ar paradigm");
    validate_settings(s);
    const int K = m.cfg.image_codebook;
    std::vector<int> tokens(kTokenCount, 0);
    for (int p = 0; p < kTrunkPatches; ++p) {
        std::vector<SampleTask> tasks;
        {
            SampleTask c;
            c.seq.segments = prefix.segments;
            c.seq.segments.push_back(make_image_segment(tokens));
            c.ar_prefix_patches = p;
            tasks.push_back(std::move(c));
        }
        if (s.omega > 0) {
            SampleTask u;
            u.seq.segments = uncond_prefix().segments;
            u.seq.segments.push_back(make_image_segment(tokens));
            u.ar_prefix_patches = p;
            tasks.push_back(std::move(u));
        }
        Tape t;
        auto built = m.build(t, tasks, nullptr, false, false);
        std::vector<double> logits = t.val_copy(built.ar_step_logits[0]);  // 64 x K
        if (s.omega > 0)
            logits = cfg_combine(logits, t.val_copy(built.ar_step_logits[1]), s.omega);
        for (int slot = 0; slot < kSlotsPerPatch; ++slot)
            tokens[patch_slot_pixel(p, slot)] =
                draw_categorical(logits.data() + static_cast<size_t>(slot) * K, K, s.temperature, rng);
    }
    return tokens;
}

// ----- maskgit ----------------------------------------------------------------

std::vector<int> sample_maskgit_tokens(Model& m, const Prefix& prefix, const SamplerSettings& s,
                                       Rng& rng, MaskgitTrace* trace) {
    if (m.cfg.paradigm != Paradigm::maskgit)
        fail(Error::Kind::invalid_arg, "sample_maskgit_tokens requires the maskgit paradigm");
    validate_settings(s);
    const int K = m.cfg.image_codebook;
    std::vector<int> tokens(kTokenCount, 0);
    std::vector<uint8_t> mask(kTokenCount, 1);
    const std::vector<int> remain = maskgit_schedule(kTokenCount, s.maskgit_steps);

    int masked_count = kTokenCount;
    for (int step = 0; step < s.maskgit_steps; ++step) {
        if (masked_count == 0) {
            if (trace != nullptr) {
                trace->tokens_after_step.push_back(tokens);
                trace->masked_after_step.push_back(mask);
            }
            continue;
        }
        std::vector<SampleTask> tasks;
        {
            SampleTask c;
            c.seq.segments = prefix.segments;
            c.seq.segments.push_back(make_image_segment(tokens));
            c.pixel_mask = mask;
            tasks.push_back(std::move(c));
        }
        if (s.omega > 0) {
            SampleTask u;
            u.seq.segments = uncond_prefix().segments;
            u.seq.segments.push_back(make_image_segment(tokens));
            u.pixel_mask = mask;
            tasks.push_back(std::move(u));
        }
        Tape t;
        auto built = m.build(t, tasks, nullptr, false, false);
        const double* lc = t.val(built.pixel_logits[0]);
        const double* lu = (s.omega > 0) ? t.val(built.pixel_logits[1]) : nullptr;

        struct Candidate {
            int pix;
            int token;
            double confidence;
        };
        std::vector<Candidate> cands;
        cands.reserve(masked_count);
        for (int pix = 0; pix < kTokenCount; ++pix) {
            if (mask[pix] == 0) continue;
            const size_t row = static_cast<size_t>(Model::pixel_row(pix)) * K;
            std::vector<double> combined(lc + row, lc + row + K);
            if (lu != nullptr)
                combined = cfg_combine(combined, std::vector<double>(lu + row, lu + row + K), s.omega);
            const int tok = draw_categorical(combined.data(), K, s.temperature, rng);
            softmax_inplace(combined);  // post-guidance confidence, temperature-free
            const double conf = *std::max_element(combined.begin(), combined.end());
            cands.push_back({pix, tok, conf});
        }

        const int commit = masked_count - remain[step];
        if (commit > 0) {
            std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
                if (a.confidence != b.confidence) return a.confidence > b.confidence;
                return a.pix < b.pix;  // ties reveal the earlier pixel
            });
            for (int i = 0; i < commit && i < static_cast<int>(cands.size()); ++i) {
                tokens[cands[i].pix] = cands[i].token;
                mask[cands[i].pix] = 0;  // committed pixels never re-enter prediction
            }
            masked_count -= std::min<int>(commit, static_cast<int>(cands.size()));
        }
        if (trace != nullptr) {
            trace->tokens_after_step.push_back(tokens);
            trace->masked_after_step.push_back(mask);
        }
    }
    return tokens;
}

// ----- latent paradigms -------------------------------------------------------

namespace {

std::vector<double> latent_model_output(Model& m, const Prefix& prefix,
                                        const std::vector<double>& x, int t_step, double t_cont,
                                        double omega) {
    std::vector<SampleTask> tasks;
    {
        SampleTask c;
        c.seq.segments = prefix.segments;
        c.seq.segments.push_back(make_latent_segment(x));
        c.t_step = t_step;
        c.t_cont = t_cont;
        tasks.push_back(std::move(c));
    }
    if (omega > 0) {
        SampleTask u;
        u.seq.segments = uncond_prefix().segments;
        u.seq.segments.push_back(make_latent_segment(x));
        u.t_step = t_step;
        u.t_cont = t_cont;
        tasks.push_back(std::move(u));
    }
    Tape t;
    auto built = m.build(t, tasks, nullptr, false, false);
    std::vector<double> out = t.val_copy(built.latent_out[0]);
    if (omega > 0) out = cfg_combine(out, t.val_copy(built.latent_out[1]), omega);
    return out;
}

} // namespace

std::vector<double> sample_diffusion_latents(Model& m, const Prefix& prefix,
                                             const SamplerSettings& s, Rng& rng) {
    if (m.cfg.paradigm != Paradigm::diffusion)
        fail(Error::Kind::invalid_arg, "sample_diffusion_latents requires the diffusion paradigm");
    validate_settings(s);
    const NoiseSchedule sched = NoiseSchedule::linear(m.cfg.t_diff);
    std::vector<double> x(static_cast<size_t>(kTrunkPatches) * kLatentDim);
    for (double& v : x) v = rng.gauss();
    for (int t_step = sched.T; t_step >= 1; --t_step) {
        const std::vector<double> eps_hat = latent_model_output(m, prefix, x, t_step, 0.0, s.omega);
        const double beta = sched.beta[t_step - 1];
        const double alpha = sched.alpha[t_step - 1];
        const double coeff = beta / std::sqrt(1.0 - sched.abar(t_step));
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        const double sigma = (t_step > 1) ? std::sqrt(beta) : 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            const double mu = (x[i] - coeff * eps_hat[i]) * inv_sqrt_alpha;
            x[i] = (sigma > 0 && !s.ddpm_mean_only) ? mu + sigma * rng.gauss() : mu;
        }
    }
    return x;
}

std::vector<double> sample_flow_latents(Model& m, const Prefix& prefix, const SamplerSettings& s,
                                        Rng& rng) {
    if (m.cfg.paradigm != Paradigm::flow)
        fail(Error::Kind::invalid_arg, "sample_flow_latents requires the flow paradigm");
    validate_settings(s);
    std::vector<double> x(static_cast<size_t>(kTrunkPatches) * kLatentDim);
    for (double& v : x) v = rng.gauss();
    const int n = s.flow_steps;
    for (int k = n; k >= 1; --k) {
        const double t_cont = double(k) / n;
        const std::vector<double> u_hat = latent_model_output(m, prefix, x, 0, t_cont, s.omega);
        for (size_t i = 0; i < x.size(); ++i) x[i] -= u_hat[i] / n;
    }
    return x;
}

// ----- dispatch ---------------------------------------------------------------

PaletteImage sample_image(Model& m, const Prefix& prefix, const SamplerSettings& s, Rng& rng) {
    switch (m.cfg.paradigm) {
        case Paradigm::ar: return detokenize_image(sample_ar_tokens(m, prefix, s, rng));
        case Paradigm::maskgit: return detokenize_image(sample_maskgit_tokens(m, prefix, s, rng));
        case Paradigm::diffusion:
            return quantize_to_palette(latents_to_image(sample_diffusion_latents(m, prefix, s, rng)));
        case Paradigm::flow:
            return quantize_to_palette(latents_to_image(sample_flow_latents(m, prefix, s, rng)));
    }
    fail(Error::Kind::invalid_arg, "unknown paradigm value");
}

PaletteImage sample_t2i(Model& m, const std::vector<int>& caption_tokens,
                        const SamplerSettings& s, Rng& rng) {
    return sample_image(m, text_prefix(caption_tokens), s, rng);
}

PaletteImage reconstruct(Model& m, const UnderstandingEncoder& enc, const PaletteImage& image,
                         const std::vector<int>& template_tokens, const RecaCondition& cond,
                         const SamplerSettings& s, Rng& rng) {
    Prefix p = reca_prefix(enc, image, template_tokens, cond, /*differentiable=*/false);
    return sample_image(m, p, s, rng);
}

} // namespace reca
