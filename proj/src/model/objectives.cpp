#include "model/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace reca {

LossWeights default_weights(const ModelConfig& cfg) {
    LossWeights w;
    w.reca = 1.0;
    w.t2i = 0.0;
    w.i2t = cfg.shared_und_gen ? 1.0 : 0.0;
    return w;
}

void validate_weights(const ModelConfig& cfg, const LossWeights& w) {
    if (w.reca < 0 || w.i2t < 0 || w.t2i < 0)
        fail(Error::Kind::invalid_arg, "loss weights must be non-negative");
    if (!cfg.shared_und_gen && w.i2t > 0)
        fail(Error::Kind::config,
             "image-to-text weight " + std::to_string(w.i2t) +
                 " requires a shared understanding-generation trunk (shared_und_gen=true); "
                 "a decoupled trunk cannot train the understanding pathway");
}

void apply_freeze_policy(UnderstandingEncoder& enc, const ModelConfig& cfg, const LossWeights& w) {
    validate_weights(cfg, w);
    if (!cfg.shared_und_gen) {
        enc.frozen = true;
        enc.params.set_all_trainable(false);
    } else {
        enc.frozen = false;
        enc.params.set_all_trainable(true);
    }
}

// ----- templates --------------------------------------------------------------

TemplateBank::TemplateBank() {
    static const char* kTexts[] = {
        "describe the image in detail",
        "give a detailed description of the image",
        "provide a thorough description of the image",
        "describe all visual elements in the image",
        "examine the image carefully and describe it",
        "describe the contents of the image",
        "tell me about the picture",
        "describe this picture in detail",
        "what is depicted in the image",
        "give a detailed account of the image",
        "analyze the image comprehensively",
        "describe the picture",
        "what can you see in the image",
        "offer a detailed description of the picture",
        "examine the picture and describe the contents",
        "provide a detailed account of this image",
    };
    for (const char* s : kTexts) {
        std::vector<int> toks = vocab().tokenize(s);
        if (toks.size() > 12)
            fail(Error::Kind::state, std::string("template exceeds 12 tokens: ") + s);
        tmpl_.push_back(std::move(toks));
    }
}

const std::vector<int>& TemplateBank::tokens(int i) const {
    if (i < 0 || i >= size())
        fail(Error::Kind::invalid_arg, "template index out of range: " + std::to_string(i));
    return tmpl_[i];
}

std::string TemplateBank::text(int i) const { return vocab().text(tokens(i)); }

const std::vector<int>& TemplateBank::pick(Rng& rng) const {
    return tmpl_[rng.below(tmpl_.size())];
}

// ----- prefixes and task builders ---------------------------------------------

Prefix reca_prefix(const UnderstandingEncoder& enc, const PaletteImage& image,
                   const std::vector<int>& template_tokens, const RecaCondition& cond,
                   bool differentiable) {
    Prefix p;
    p.segments.push_back(make_text_segment(template_tokens));
    if (cond.source == RecaCondition::Source::vq_tokens) {
        p.segments.push_back(make_cond_tokens_segment(tokenize_image(image)));
        return p;
    }
    Segment hv;
    hv.kind = SegKind::embedding_slots;
    hv.l_u = enc.rows_for(cond.policy);
    hv.source = image;
    hv.policy = cond.policy;
    hv.differentiable = differentiable;
    if (!differentiable) hv.rows = enc.encode(image, cond.policy);
    p.segments.push_back(std::move(hv));
    return p;
}

void attach_generation_target(const Model& m, SampleTask& task, const PaletteImage& image, Rng& rng) {
    switch (m.cfg.paradigm) {
        case Paradigm::ar: {
            task.seq.segments.push_back(make_image_segment(tokenize_image(image)));
            return;
        }
        case Paradigm::maskgit: {
            task.seq.segments.push_back(make_image_segment(tokenize_image(image)));
            const double u = 1.0 - rng.uniform();  // mask ratio in (0,1]
            const int n = std::max(1, static_cast<int>(std::lround(u * kTokenCount)));
            std::vector<int> perm(kTokenCount);
            std::iota(perm.begin(), perm.end(), 0);
            for (int i = 0; i < n; ++i) {
                const int j = i + static_cast<int>(rng.below(kTokenCount - i));
                std::swap(perm[i], perm[j]);
            }
            task.pixel_mask.assign(kTokenCount, 0);
            for (int i = 0; i < n; ++i) task.pixel_mask[perm[i]] = 1;
            return;
        }
        case Paradigm::diffusion: {
            const int t_step = 1 + static_cast<int>(rng.below(m.cfg.t_diff));
            std::vector<double> eps(kTrunkPatches * kLatentDim);
            for (double& e : eps) e = rng.gauss();
            NoiseSchedule sched = NoiseSchedule::linear(m.cfg.t_diff);
            std::vector<double> x0 = image_to_latents(image);
            task.seq.segments.push_back(make_latent_segment(diffusion_forward(x0, t_step, eps, sched)));
            task.t_step = t_step;
            task.regress_target = std::move(eps);
            return;
        }
        case Paradigm::flow: {
            const double t_cont = rng.uniform();
            std::vector<double> x0 = image_to_latents(image);
            std::vector<double> eps(x0.size()), xt(x0.size()), u(x0.size());
            for (double& e : eps) e = rng.gauss();
            for (size_t i = 0; i < x0.size(); ++i) {
                xt[i] = (1.0 - t_cont) * x0[i] + t_cont * eps[i];
                u[i] = eps[i] - x0[i];
            }
            task.seq.segments.push_back(make_latent_segment(std::move(xt)));
            task.t_cont = t_cont;
            task.regress_target = std::move(u);
            return;
        }
    }
    fail(Error::Kind::invalid_arg, "unknown paradigm value");
}

SampleTask build_reca_task(const Model& m, const UnderstandingEncoder& enc,
                           const PaletteImage& image, const std::vector<int>& template_tokens,
                           const RecaCondition& cond, bool differentiable, Rng& rng,
                           bool drop_conditioning) {
    SampleTask task;
    task.group = TaskGroup::reca;
    Prefix p = drop_conditioning ? uncond_prefix()
                                 : reca_prefix(enc, image, template_tokens, cond, differentiable);
    task.seq.segments = std::move(p.segments);
    attach_generation_target(m, task, image, rng);
    return task;
}

SampleTask build_t2i_task(const Model& m, const std::vector<int>& caption,
                          const PaletteImage& image, bool drop_conditioning, Rng& rng) {
    SampleTask task;
    task.group = TaskGroup::t2i;
    Prefix p = drop_conditioning ? uncond_prefix() : text_prefix(caption);
    task.seq.segments = std::move(p.segments);
    attach_generation_target(m, task, image, rng);
    return task;
}

SampleTask build_i2t_task(const UnderstandingEncoder& enc, const std::vector<int>& question,
                          int answer, const PaletteImage& image, bool differentiable) {
    SampleTask task;
    task.group = TaskGroup::i2t;
    task.seq.segments.push_back(make_text_segment(question));
    Segment hv;
    hv.kind = SegKind::embedding_slots;
    hv.l_u = enc.rows_for({ResizeMode::min_resolution});
    hv.source = image;
    hv.policy = {ResizeMode::min_resolution};
    hv.differentiable = differentiable;
    if (!differentiable) hv.rows = enc.encode(image, hv.policy);
    task.seq.segments.push_back(std::move(hv));
    task.seq.segments.push_back(make_text_segment({ans_token()}));
    task.answer = answer;
    return task;
}

Prefix i2t_prefix(const UnderstandingEncoder& enc, const std::vector<int>& question,
                  const PaletteImage& image) {
    Prefix p;
    p.segments.push_back(make_text_segment(question));
    Segment hv;
    hv.kind = SegKind::embedding_slots;
    hv.l_u = enc.rows_for({ResizeMode::min_resolution});
    hv.source = image;
    hv.policy = {ResizeMode::min_resolution};
    hv.rows = enc.encode(image, hv.policy);
    p.segments.push_back(std::move(hv));
    return p;
}

// ----- single-sample losses ---------------------------------------------------

double loss_reca(Model& m, const UnderstandingEncoder& enc, const PaletteImage& image,
                 const std::vector<int>& template_tokens, const RecaCondition& cond, Rng& rng) {
    SampleTask task = build_reca_task(m, enc, image, template_tokens, cond,
                                      /*differentiable=*/false, rng);
    Tape t;
    std::vector<SampleTask> tasks{std::move(task)};
    auto built = m.build(t, tasks, nullptr, /*trainable=*/false, /*want_loss=*/true);
    return t.val(built.loss[0])[0];
}

double loss_t2i(Model& m, const std::vector<int>& caption, const PaletteImage& image, Rng& rng) {
    SampleTask task = build_t2i_task(m, caption, image, /*drop_conditioning=*/false, rng);
    Tape t;
    std::vector<SampleTask> tasks{std::move(task)};
    auto built = m.build(t, tasks, nullptr, /*trainable=*/false, /*want_loss=*/true);
    return t.val(built.loss[0])[0];
}

// ----- combined objective -----------------------------------------------------

Tape::Id total_loss(Tape& t, Model& m, UnderstandingEncoder* enc,
                    const std::vector<SampleTask>& tasks, const LossWeights& w, bool trainable) {
    validate_weights(m.cfg, w);
    auto weight_of = [&](TaskGroup g) {
        switch (g) {
            case TaskGroup::t2i: return w.t2i;
            case TaskGroup::reca: return w.reca;
            case TaskGroup::i2t: return w.i2t;
        }
        return 0.0;
    };

    std::vector<SampleTask> kept;
    for (const SampleTask& task : tasks)
        if (weight_of(task.group) > 0) kept.push_back(task);
    if (kept.empty())
        fail(Error::Kind::invalid_arg, "total_loss: every provided task has weight zero");

    auto built = m.build(t, kept, enc, trainable, /*want_loss=*/true);

    Tape::Id total = -1;
    for (int g = 0; g < 3; ++g) {
        const TaskGroup group = static_cast<TaskGroup>(g);
        Tape::Id sum = -1;
        int n = 0;
        for (size_t i = 0; i < kept.size(); ++i) {
            if (kept[i].group != group) continue;
            sum = (sum < 0) ? built.loss[i] : t.add(sum, built.loss[i]);
            ++n;
        }
        if (n == 0) continue;
        Tape::Id term = t.scale(sum, weight_of(group) / n);
        total = (total < 0) ? term : t.add(total, term);
    }
    return total;
}

} // namespace reca
