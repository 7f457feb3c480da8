#include "model/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace reca {

std::string paradigm_name(Paradigm p) {
    switch (p) {
        case Paradigm::ar: return "ar";
        case Paradigm::maskgit: return "maskgit";
        case Paradigm::diffusion: return "diffusion";
        case Paradigm::flow: return "flow";
    }
    fail(Error::Kind::invalid_arg, "unknown paradigm value");
}

Paradigm paradigm_from_name(const std::string& s) {
    if (s == "ar") return Paradigm::ar;
    if (s == "maskgit") return Paradigm::maskgit;
    if (s == "diffusion") return Paradigm::diffusion;
    if (s == "flow") return Paradigm::flow;
    fail(Error::Kind::config, "unknown paradigm name: '" + s +
                                  "' (expected ar, maskgit, diffusion, or flow)");
}

int uncond_token() { return static_cast<int>(vocab().size()); }
int ans_token() { return static_cast<int>(vocab().size()) + 1; }
int text_vocab_size() { return static_cast<int>(vocab().size()) + 2; }

// ----- diffusion schedule -----------------------------------------------------

NoiseSchedule NoiseSchedule::linear(int T) {
    if (T < 1) fail(Error::Kind::invalid_arg, "noise schedule needs T >= 1, got " + std::to_string(T));
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    const double b0 = 1e-4, b1 = 0.02;
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        s.beta[i] = (T == 1) ? b0 : b0 + (b1 - b0) * double(i) / double(T - 1);
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

double NoiseSchedule::abar(int t) const {
    if (t < 0 || t > T)
        fail(Error::Kind::invalid_arg,
             "diffusion timestep out of range: " + std::to_string(t) + " not in [0," + std::to_string(T) + "]");
    return t == 0 ? 1.0 : alpha_bar[t - 1];
}

std::vector<double> diffusion_forward(const std::vector<double>& x0, int t,
                                      const std::vector<double>& eps, const NoiseSchedule& s) {
    if (t < 1 || t > s.T)
        fail(Error::Kind::invalid_arg,
             "diffusion timestep out of range: " + std::to_string(t) + " not in [1," + std::to_string(s.T) + "]");
    if (x0.size() != eps.size())
        fail(Error::Kind::invalid_arg, "diffusion_forward: x0 has " + std::to_string(x0.size()) +
                                           " elements, eps has " + std::to_string(eps.size()));
    const double a = std::sqrt(s.abar(t)), b = std::sqrt(1.0 - s.abar(t));
    std::vector<double> xt(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) xt[i] = a * x0[i] + b * eps[i];
    return xt;
}

// ----- segment and prefix builders --------------------------------------------

namespace {

void check_pixel_tokens(const std::vector<int>& toks, int codebook, const char* what) {
    if (static_cast<int>(toks.size()) != kTokenCount)
        fail(Error::Kind::invalid_arg, std::string(what) + ": expected " + std::to_string(kTokenCount) +
                                           " pixel tokens, got " + std::to_string(toks.size()));
    for (int i = 0; i < kTokenCount; ++i)
        if (toks[i] < 0 || toks[i] >= codebook)
            fail(Error::Kind::invalid_arg, std::string(what) + ": token out of range at pixel " +
                                               std::to_string(i) + ": " + std::to_string(toks[i]));
}

} // namespace

Segment make_text_segment(std::vector<int> tokens) {
    if (tokens.empty()) fail(Error::Kind::invalid_arg, "text segment must not be empty");
    Segment s;
    s.kind = SegKind::text_tokens;
    s.tokens = std::move(tokens);
    return s;
}

Segment make_image_segment(std::vector<int> pixel_tokens) {
    Segment s;
    s.kind = SegKind::image_tokens;
    s.tokens = std::move(pixel_tokens);
    return s;
}

Segment make_latent_segment(std::vector<double> x_t_rows) {
    if (static_cast<int>(x_t_rows.size()) != kTrunkPatches * kLatentDim)
        fail(Error::Kind::invalid_arg,
             "latent segment: expected " + std::to_string(kTrunkPatches * kLatentDim) +
                 " values, got " + std::to_string(x_t_rows.size()));
    Segment s;
    s.kind = SegKind::continuous_latents;
    s.rows = std::move(x_t_rows);
    s.l_u = kTrunkPatches;
    return s;
}

Segment make_cond_tokens_segment(std::vector<int> pixel_tokens) {
    Segment s;
    s.kind = SegKind::cond_tokens;
    s.tokens = std::move(pixel_tokens);
    return s;
}

Prefix text_prefix(const std::vector<int>& tokens) {
    Prefix p;
    p.segments.push_back(make_text_segment(tokens));
    return p;
}

Prefix uncond_prefix() { return text_prefix({uncond_token()}); }

// ----- model ------------------------------------------------------------------

Model::Model(ModelConfig c) : cfg(c) {
    if (cfg.text_vocab == 0) cfg.text_vocab = text_vocab_size();
    if (cfg.text_vocab < text_vocab_size())
        fail(Error::Kind::config, "text_vocab " + std::to_string(cfg.text_vocab) +
                                      " smaller than the vocabulary plus specials (" +
                                      std::to_string(text_vocab_size()) + ")");
    if (cfg.image_codebook < 2)
        fail(Error::Kind::config, "image_codebook must be >= 2, got " + std::to_string(cfg.image_codebook));
    if (cfg.d_model <= 0 || cfg.heads <= 0 || cfg.d_model % cfg.heads != 0)
        fail(Error::Kind::config, "d_model " + std::to_string(cfg.d_model) +
                                      " must be a positive multiple of heads " + std::to_string(cfg.heads));
    if (cfg.t_diff < 1)
        fail(Error::Kind::config, "t_diff must be >= 1, got " + std::to_string(cfg.t_diff));
    if (cfg.uncond_drop < 0.0 || cfg.uncond_drop >= 1.0)
        fail(Error::Kind::config, "uncond_drop must lie in [0,1), got " + std::to_string(cfg.uncond_drop));
    trunk = TransformerConfig{cfg.d_model, cfg.heads, cfg.layers, cfg.mlp_mult};

    const int d = cfg.d_model, V = cfg.text_vocab, K = cfg.image_codebook;
    params.add_gaussian("text/embed", {V, d}, 0.02, cfg.seed);
    params.add_gaussian("text/pos", {kMaxTextLen, d}, 0.02, cfg.seed);
    params.add_zeros("text/gate", {1});  // zero gate: answer logits start exactly uniform
    params.add_gaussian("img/boi", {1, d}, 0.02, cfg.seed);
    params.add_gaussian("img/pos", {kTrunkPatches, d}, 0.02, cfg.seed);
    params.add_gaussian("cond/pos64", {kSlotsPerPatch, d}, 0.02, cfg.seed);
    for (int s = 0; s < kSlotsPerPatch; ++s) {
        const std::string base = "img/slot/" + std::to_string(s) + "/";
        params.add_gaussian(base + "embed", {K + 1, d}, 0.02, cfg.seed);  // row K = [MASK]
        params.add_zeros(base + "head_w", {d, K});  // zero head: pixel logits start exactly uniform
        params.add_zeros(base + "head_b", {K});
    }
    params.add_gaussian("lat/in_w", {kLatentDim, d}, 0.02, cfg.seed);
    params.add_zeros("lat/in_b", {d});
    params.add_zeros("lat/out_w", {d, kLatentDim});  // zero head: predicted noise starts at zero
    params.add_zeros("lat/out_b", {kLatentDim});
    params.add_zeros("lat/skip_w", {d, 1});  // time-gated x_t skip; zero gate keeps the init exact
    init_transformer_params(params, "trunk/", trunk, cfg.seed);
}

namespace {

// content row per cell: the sum over the cell's 64 slot embeddings, with masked
// slots replaced by the [MASK] row of their slot table
Tape::Id patch_content_rows(Tape& t, Binder& bind, const std::vector<int>& tokens,
                            const std::vector<uint8_t>* mask, int patches, int mask_code) {
    Tape::Id acc = -1;
    for (int s = 0; s < kSlotsPerPatch; ++s) {
        std::vector<int> codes(patches);
        for (int p = 0; p < patches; ++p) {
            const int pix = patch_slot_pixel(p, s);
            codes[p] = (mask != nullptr && (*mask)[pix] != 0) ? mask_code : tokens[pix];
        }
        Tape::Id rows = t.gather_rows(bind("img/slot/" + std::to_string(s) + "/embed"), codes);
        acc = (s == 0) ? rows : t.add(acc, rows);
    }
    return acc;
}

std::vector<double> build_attn_mask(const std::vector<char>& cls, bool causal_image) {
    const int L = static_cast<int>(cls.size());
    std::vector<double> vals(static_cast<size_t>(L) * L, 0.0);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
            const bool blocked = (cls[i] == 'p' && cls[j] == 'i') ||
                                 (causal_image && cls[i] == 'i' && cls[j] == 'i' && j > i);
            if (blocked) vals[static_cast<size_t>(i) * L + j] = kMaskOff;
        }
    return vals;
}

} // namespace

Model::Built Model::build(Tape& t, const std::vector<SampleTask>& tasks, UnderstandingEncoder* enc,
                          bool trainable, bool want_loss) {
    if (tasks.empty()) fail(Error::Kind::invalid_arg, "build: task list is empty");
    const int d = cfg.d_model, K = cfg.image_codebook, B = static_cast<int>(tasks.size());
    Binder bind(t, params, trainable);

    struct Plan {
        Tape::Id rows = -1;
        int len = 0;
        int img_start = -1;  // offset of the generation-target rows inside the sample
        int img_rows = 0;
        int ans_row = -1;    // offset of the answer-query row
        char target = 0;     // 'a' ar teacher-forced, 'A' ar step, 'm' maskgit, 'l' latents
        Tape::Id lat_x = -1;  // x_t constant, reused by the output-side skip
        double lat_time = 0.0;
    };
    std::vector<Plan> plans(B);
    std::vector<Tape::Id> sample_rows, masks;
    std::vector<int> lens;
    std::unordered_map<std::string, Tape::Id> mask_cache;

    for (int b = 0; b < B; ++b) {
        const SampleTask& task = tasks[b];
        Plan& plan = plans[b];
        std::vector<Tape::Id> segs;
        std::vector<char> cls;
        int txt_pos = 0;

        for (const Segment& seg : task.seq.segments) {
            switch (seg.kind) {
                case SegKind::text_tokens: {
                    const int n = static_cast<int>(seg.tokens.size());
                    if (n == 0) fail(Error::Kind::invalid_arg, "text segment must not be empty");
                    if (txt_pos + n > kMaxTextLen)
                        fail(Error::Kind::invalid_arg,
                             "text too long: " + std::to_string(txt_pos + n) + " tokens exceed the cap of " +
                                 std::to_string(kMaxTextLen));
                    std::vector<int> pos(n);
                    for (int i = 0; i < n; ++i) {
                        if (seg.tokens[i] < 0 || seg.tokens[i] >= cfg.text_vocab)
                            fail(Error::Kind::invalid_arg,
                                 "text token out of range: " + std::to_string(seg.tokens[i]));
                        if (seg.tokens[i] == ans_token()) plan.ans_row = plan.len + i;
                        pos[i] = txt_pos + i;
                    }
                    Tape::Id rows = t.add(t.gather_rows(bind("text/embed"), seg.tokens),
                                          t.gather_rows(bind("text/pos"), pos));
                    txt_pos += n;
                    segs.push_back(rows);
                    plan.len += n;
                    cls.insert(cls.end(), n, 'p');
                    break;
                }
                case SegKind::embedding_slots: {
                    if (seg.l_u != kTrunkPatches && seg.l_u != kSlotsPerPatch)
                        fail(Error::Kind::invalid_arg, "embedding conditioning must have " +
                                                           std::to_string(kTrunkPatches) + " or " +
                                                           std::to_string(kSlotsPerPatch) + " rows, got " +
                                                           std::to_string(seg.l_u));
                    Tape::Id hv;
                    if (seg.differentiable) {
                        if (enc == nullptr)
                            fail(Error::Kind::invalid_arg,
                                 "differentiable conditioning requires the understanding encoder");
                        if (enc->cfg.d_model != d)
                            fail(Error::Kind::config, "encoder width " + std::to_string(enc->cfg.d_model) +
                                                          " does not match backbone width " + std::to_string(d));
                        hv = enc->encode_on_tape(t, seg.source, seg.policy, /*trainable=*/true);
                    } else {
                        if (static_cast<int>(seg.rows.size()) != seg.l_u * d)
                            fail(Error::Kind::invalid_arg,
                                 "embedding conditioning rows have " + std::to_string(seg.rows.size()) +
                                     " values, expected " + std::to_string(seg.l_u * d));
                        hv = t.constant(seg.rows, {seg.l_u, d});
                    }
                    Tape::Id pos = (seg.l_u == kTrunkPatches) ? bind("img/pos") : bind("cond/pos64");
                    segs.push_back(t.add(hv, pos));
                    plan.len += seg.l_u;
                    cls.insert(cls.end(), seg.l_u, 'p');
                    break;
                }
                case SegKind::cond_tokens: {
                    check_pixel_tokens(seg.tokens, K, "cond_tokens");
                    Tape::Id rows = patch_content_rows(t, bind, seg.tokens, nullptr, kTrunkPatches, K);
                    segs.push_back(t.add(rows, bind("img/pos")));
                    plan.len += kTrunkPatches;
                    cls.insert(cls.end(), kTrunkPatches, 'p');
                    break;
                }
                case SegKind::image_tokens: {
                    if (plan.target != 0)
                        fail(Error::Kind::invalid_arg, "task has more than one generation target");
                    check_pixel_tokens(seg.tokens, K, "image_tokens");
                    if (cfg.paradigm == Paradigm::ar) {
                        const bool step = task.ar_prefix_patches >= 0;
                        if (step && task.ar_prefix_patches >= kTrunkPatches)
                            fail(Error::Kind::invalid_arg, "ar_prefix_patches out of range: " +
                                                               std::to_string(task.ar_prefix_patches));
                        const int limit = step ? task.ar_prefix_patches : kTrunkPatches - 1;
                        std::vector<Tape::Id> parts{bind("img/boi")};
                        if (limit > 0)
                            parts.push_back(patch_content_rows(t, bind, seg.tokens, nullptr, limit, K));
                        Tape::Id rows = (parts.size() == 1) ? parts[0] : t.concat_rows(parts);
                        Tape::Id pos = (limit + 1 == kTrunkPatches)
                                           ? bind("img/pos")
                                           : t.slice_rows(bind("img/pos"), 0, limit + 1);
                        plan.target = step ? 'A' : 'a';
                        plan.img_start = plan.len;
                        plan.img_rows = limit + 1;
                        segs.push_back(t.add(rows, pos));
                        plan.len += limit + 1;
                        cls.insert(cls.end(), limit + 1, 'i');
                    } else if (cfg.paradigm == Paradigm::maskgit) {
                        if (task.pixel_mask.size() != static_cast<size_t>(kTokenCount))
                            fail(Error::Kind::invalid_arg,
                                 "pixel mask has " + std::to_string(task.pixel_mask.size()) +
                                     " entries, expected " + std::to_string(kTokenCount));
                        Tape::Id rows =
                            patch_content_rows(t, bind, seg.tokens, &task.pixel_mask, kTrunkPatches, K);
                        plan.target = 'm';
                        plan.img_start = plan.len;
                        plan.img_rows = kTrunkPatches;
                        segs.push_back(t.add(rows, bind("img/pos")));
                        plan.len += kTrunkPatches;
                        cls.insert(cls.end(), kTrunkPatches, 'i');
                    } else {
                        fail(Error::Kind::invalid_arg, "image_tokens target requires the ar or maskgit "
                                                       "paradigm, model uses " +
                                                           paradigm_name(cfg.paradigm));
                    }
                    break;
                }
                case SegKind::continuous_latents: {
                    if (plan.target != 0)
                        fail(Error::Kind::invalid_arg, "task has more than one generation target");
                    if (cfg.paradigm != Paradigm::diffusion && cfg.paradigm != Paradigm::flow)
                        fail(Error::Kind::invalid_arg, "continuous_latents target requires the diffusion "
                                                       "or flow paradigm, model uses " +
                                                           paradigm_name(cfg.paradigm));
                    if (static_cast<int>(seg.rows.size()) != kTrunkPatches * kLatentDim)
                        fail(Error::Kind::invalid_arg,
                             "latent rows have " + std::to_string(seg.rows.size()) + " values, expected " +
                                 std::to_string(kTrunkPatches * kLatentDim));
                    double time_pos;
                    if (cfg.paradigm == Paradigm::diffusion) {
                        if (task.t_step < 1 || task.t_step > cfg.t_diff)
                            fail(Error::Kind::invalid_arg,
                                 "diffusion timestep out of range: " + std::to_string(task.t_step) +
                                     " not in [1," + std::to_string(cfg.t_diff) + "]");
                        time_pos = static_cast<double>(task.t_step);
                    } else {
                        if (!(task.t_cont >= 0.0 && task.t_cont <= 1.0))
                            fail(Error::Kind::invalid_arg,
                                 "flow time out of range: " + std::to_string(task.t_cont) + " not in [0,1]");
                        time_pos = task.t_cont * cfg.t_diff;
                    }
                    Tape::Id x = t.constant(seg.rows, {kTrunkPatches, kLatentDim});
                    Tape::Id rows = t.add_rowvec(t.matmul(x, bind("lat/in_w")), bind("lat/in_b"));
                    rows = t.add(rows, bind("img/pos"));
                    rows = t.add_rowvec(rows, t.constant(sinusoid_embedding(time_pos, d), {d}));
                    plan.lat_x = x;
                    plan.lat_time = time_pos;
                    plan.target = 'l';
                    plan.img_start = plan.len;
                    plan.img_rows = kTrunkPatches;
                    segs.push_back(rows);
                    plan.len += kTrunkPatches;
                    cls.insert(cls.end(), kTrunkPatches, 'i');
                    break;
                }
            }
        }

        if (plan.target == 0 && plan.ans_row < 0)
            fail(Error::Kind::invalid_arg, "task has neither a generation target nor an answer query");
        if (plan.len > cfg.max_seq_len)
            fail(Error::Kind::invalid_arg, "sequence too long: " + std::to_string(plan.len) +
                                               " rows exceed max_seq_len " + std::to_string(cfg.max_seq_len));

        plan.rows = (segs.size() == 1) ? segs[0] : t.concat_rows(segs);
        const bool causal = cfg.paradigm == Paradigm::ar;
        std::string key(cls.begin(), cls.end());
        key.push_back(causal ? 'c' : 'b');
        auto it = mask_cache.find(key);
        Tape::Id mid;
        if (it == mask_cache.end()) {
            mid = t.constant(build_attn_mask(cls, causal), {plan.len, plan.len});
            mask_cache.emplace(std::move(key), mid);
        } else {
            mid = it->second;
        }
        sample_rows.push_back(plan.rows);
        masks.push_back(mid);
        lens.push_back(plan.len);
    }

    Tape::Id stacked = (sample_rows.size() == 1) ? sample_rows[0] : t.concat_rows(sample_rows);
    Tape::Id out = transformer_forward(t, bind, "trunk/", trunk, stacked, masks, lens);

    std::vector<int> starts(B);
    for (int b = 0, off = 0; b < B; ++b) {
        starts[b] = off;
        off += plans[b].len;
    }

    Built built;
    built.loss.assign(B, -1);
    built.pixel_logits.assign(B, -1);
    built.latent_out.assign(B, -1);
    built.answer_logits.assign(B, -1);
    built.ar_step_logits.assign(B, -1);

    // --- factorized pixel readout, batched across tasks -----------------------
    std::vector<int> gen_tasks, step_tasks, lat_tasks, ans_tasks;
    for (int b = 0; b < B; ++b) {
        if (plans[b].target == 'a' || plans[b].target == 'm') gen_tasks.push_back(b);
        if (plans[b].target == 'A') step_tasks.push_back(b);
        if (plans[b].target == 'l') lat_tasks.push_back(b);
        if (plans[b].ans_row >= 0) ans_tasks.push_back(b);
    }

    if (!gen_tasks.empty()) {
        std::vector<Tape::Id> slabs;
        for (int b : gen_tasks) {
            const int r0 = starts[b] + plans[b].img_start;
            slabs.push_back(t.slice_rows(out, r0, r0 + kTrunkPatches));
        }
        Tape::Id h = (slabs.size() == 1) ? slabs[0] : t.concat_rows(slabs);
        // per-slot logits over the stacked rows, then reassembled per task
        std::vector<std::vector<Tape::Id>> per_task(gen_tasks.size());
        for (int s = 0; s < kSlotsPerPatch; ++s) {
            const std::string base = "img/slot/" + std::to_string(s) + "/";
            Tape::Id ls = t.add_rowvec(t.matmul(h, bind(base + "head_w")), bind(base + "head_b"));
            for (size_t g = 0; g < gen_tasks.size(); ++g)
                per_task[g].push_back(
                    t.slice_rows(ls, static_cast<int>(g) * kTrunkPatches,
                                 static_cast<int>(g) * kTrunkPatches + kTrunkPatches));
        }
        for (size_t g = 0; g < gen_tasks.size(); ++g) {
            const int b = gen_tasks[g];
            Tape::Id big = t.concat_rows(per_task[g]);  // (N x K), slot-major rows
            built.pixel_logits[b] = big;
            if (!want_loss) continue;
            const Segment* img = nullptr;
            for (const Segment& seg : tasks[b].seq.segments)
                if (seg.kind == SegKind::image_tokens) img = &seg;
            if (plans[b].target == 'a') {
                std::vector<int> tgt(kTokenCount);
                for (int pix = 0; pix < kTokenCount; ++pix) tgt[pixel_row(pix)] = img->tokens[pix];
                built.loss[b] = t.cross_entropy(big, tgt);
            } else {
                std::vector<int> rows, tgt;
                for (int pix = 0; pix < kTokenCount; ++pix)
                    if (tasks[b].pixel_mask[pix] != 0) {
                        rows.push_back(pixel_row(pix));
                        tgt.push_back(img->tokens[pix]);
                    }
                if (rows.empty())
                    fail(Error::Kind::invalid_arg, "masked loss over an empty mask is undefined");
                built.loss[b] = t.cross_entropy(t.gather_rows(big, rows), tgt);
            }
        }
    }

    if (!step_tasks.empty()) {
        std::vector<Tape::Id> rows;
        for (int b : step_tasks) {
            const int r = starts[b] + plans[b].img_start + plans[b].img_rows - 1;
            rows.push_back(t.slice_rows(out, r, r + 1));
        }
        Tape::Id h = (rows.size() == 1) ? rows[0] : t.concat_rows(rows);
        std::vector<std::vector<Tape::Id>> per_task(step_tasks.size());
        for (int s = 0; s < kSlotsPerPatch; ++s) {
            const std::string base = "img/slot/" + std::to_string(s) + "/";
            Tape::Id ls = t.add_rowvec(t.matmul(h, bind(base + "head_w")), bind(base + "head_b"));
            for (size_t g = 0; g < step_tasks.size(); ++g)
                per_task[g].push_back(t.slice_rows(ls, static_cast<int>(g), static_cast<int>(g) + 1));
        }
        for (size_t g = 0; g < step_tasks.size(); ++g)
            built.ar_step_logits[step_tasks[g]] = t.concat_rows(per_task[g]);  // (64 x K)
    }

    if (!lat_tasks.empty()) {
        std::vector<Tape::Id> slabs;
        for (int b : lat_tasks) {
            const int r0 = starts[b] + plans[b].img_start;
            slabs.push_back(t.slice_rows(out, r0, r0 + kTrunkPatches));
        }
        Tape::Id h = (slabs.size() == 1) ? slabs[0] : t.concat_rows(slabs);
        Tape::Id o = t.add_rowvec(t.matmul(h, bind("lat/out_w")), bind("lat/out_b"));
        for (size_t g = 0; g < lat_tasks.size(); ++g) {
            const int b = lat_tasks[g];
            Tape::Id pred = t.slice_rows(o, static_cast<int>(g) * kTrunkPatches,
                                         static_cast<int>(g) * kTrunkPatches + kTrunkPatches);
            // eps / u carry an x_t-proportional part that the d-dim trunk row cannot
            // represent; a learned time gate routes it around the bottleneck
            Tape::Id gate = t.matmul(t.constant(sinusoid_embedding(plans[b].lat_time, d), {1, d}),
                                     bind("lat/skip_w"));
            pred = t.add(pred, t.mul_scalar_node(plans[b].lat_x, gate));
            built.latent_out[b] = pred;
            if (!want_loss) continue;
            if (tasks[b].regress_target.size() != static_cast<size_t>(kTrunkPatches * kLatentDim))
                fail(Error::Kind::invalid_arg,
                     "regression target has " + std::to_string(tasks[b].regress_target.size()) +
                         " values, expected " + std::to_string(kTrunkPatches * kLatentDim));
            built.loss[b] = t.mse(pred, tasks[b].regress_target);
        }
    }

    if (!ans_tasks.empty()) {
        std::vector<Tape::Id> rows;
        for (int b : ans_tasks) {
            const int r = starts[b] + plans[b].ans_row;
            rows.push_back(t.slice_rows(out, r, r + 1));
        }
        Tape::Id h = (rows.size() == 1) ? rows[0] : t.concat_rows(rows);
        Tape::Id logits = t.mul_scalar_node(t.matmul_nt(h, bind("text/embed")), bind("text/gate"));
        for (size_t g = 0; g < ans_tasks.size(); ++g) {
            const int b = ans_tasks[g];
            Tape::Id row = t.slice_rows(logits, static_cast<int>(g), static_cast<int>(g) + 1);
            built.answer_logits[b] = row;
            if (!want_loss || tasks[b].answer < 0) continue;
            if (tasks[b].answer >= cfg.text_vocab)
                fail(Error::Kind::invalid_arg,
                     "answer token out of range: " + std::to_string(tasks[b].answer));
            built.loss[b] = t.cross_entropy(row, {tasks[b].answer});
        }
    }

    return built;
}

// ----- single-sample operations -----------------------------------------------

namespace {

SampleTask gen_task(const Prefix& prefix, Segment target) {
    SampleTask task;
    task.seq.segments = prefix.segments;
    task.seq.segments.push_back(std::move(target));
    return task;
}

struct SingleRun {
    Tape tape;
    Model::Built built;
};

Model::Built run_single(Model& m, Tape& t, SampleTask task, bool want_loss) {
    std::vector<SampleTask> tasks{std::move(task)};
    return m.build(t, tasks, nullptr, /*trainable=*/false, want_loss);
}

void require_paradigm(const Model& m, Paradigm p, const char* op) {
    if (m.cfg.paradigm != p)
        fail(Error::Kind::invalid_arg, std::string(op) + " requires the " + paradigm_name(p) +
                                           " paradigm, model uses " + paradigm_name(m.cfg.paradigm));
}

} // namespace

double loss_ar(Model& m, const Prefix& prefix, const std::vector<int>& image_tokens) {
    require_paradigm(m, Paradigm::ar, "loss_ar");
    Tape t;
    auto built = run_single(m, t, gen_task(prefix, make_image_segment(image_tokens)), true);
    return t.val(built.loss[0])[0];
}

double loss_mask(Model& m, const Prefix& prefix, const std::vector<int>& image_tokens,
                 const std::vector<uint8_t>& mask) {
    require_paradigm(m, Paradigm::maskgit, "loss_mask");
    SampleTask task = gen_task(prefix, make_image_segment(image_tokens));
    task.pixel_mask = mask;
    Tape t;
    auto built = run_single(m, t, std::move(task), true);
    return t.val(built.loss[0])[0];
}

double loss_diffusion(Model& m, const Prefix& prefix, const PaletteImage& target, int t_step,
                      const std::vector<double>& eps) {
    require_paradigm(m, Paradigm::diffusion, "loss_diffusion");
    NoiseSchedule sched = NoiseSchedule::linear(m.cfg.t_diff);
    std::vector<double> x0 = image_to_latents(target);
    std::vector<double> xt = diffusion_forward(x0, t_step, eps, sched);
    SampleTask task = gen_task(prefix, make_latent_segment(std::move(xt)));
    task.t_step = t_step;
    task.regress_target = eps;
    Tape t;
    auto built = run_single(m, t, std::move(task), true);
    return t.val(built.loss[0])[0];
}

double loss_flow(Model& m, const Prefix& prefix, const PaletteImage& target, double t_cont,
                 const std::vector<double>& eps) {
    require_paradigm(m, Paradigm::flow, "loss_flow");
    if (!(t_cont >= 0.0 && t_cont <= 1.0))
        fail(Error::Kind::invalid_arg, "flow time out of range: " + std::to_string(t_cont) + " not in [0,1]");
    std::vector<double> x0 = image_to_latents(target);
    if (eps.size() != x0.size())
        fail(Error::Kind::invalid_arg, "loss_flow: eps has " + std::to_string(eps.size()) +
                                           " values, expected " + std::to_string(x0.size()));
    std::vector<double> xt(x0.size()), u(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) {
        xt[i] = (1.0 - t_cont) * x0[i] + t_cont * eps[i];
        u[i] = eps[i] - x0[i];
    }
    SampleTask task = gen_task(prefix, make_latent_segment(std::move(xt)));
    task.t_cont = t_cont;
    task.regress_target = std::move(u);
    Tape t;
    auto built = run_single(m, t, std::move(task), true);
    return t.val(built.loss[0])[0];
}

double loss_i2t(Model& m, const Prefix& question_and_hv, int answer_token) {
    SampleTask task;
    task.seq.segments = question_and_hv.segments;
    task.seq.segments.push_back(make_text_segment({ans_token()}));
    task.answer = answer_token;
    Tape t;
    auto built = run_single(m, t, std::move(task), true);
    return t.val(built.loss[0])[0];
}

std::vector<double> forward_ar_logits(Model& m, const Prefix& prefix,
                                      const std::vector<int>& image_tokens) {
    require_paradigm(m, Paradigm::ar, "forward_ar_logits");
    Tape t;
    auto built = run_single(m, t, gen_task(prefix, make_image_segment(image_tokens)), false);
    const double* v = t.val(built.pixel_logits[0]);
    const int K = m.cfg.image_codebook;
    std::vector<double> raster(static_cast<size_t>(kTokenCount) * K);
    for (int pix = 0; pix < kTokenCount; ++pix)
        for (int k = 0; k < K; ++k)
            raster[static_cast<size_t>(pix) * K + k] = v[static_cast<size_t>(Model::pixel_row(pix)) * K + k];
    return raster;
}

std::vector<double> forward_maskgit_logits(Model& m, const Prefix& prefix,
                                           const std::vector<int>& image_tokens,
                                           const std::vector<uint8_t>& mask) {
    require_paradigm(m, Paradigm::maskgit, "forward_maskgit_logits");
    SampleTask task = gen_task(prefix, make_image_segment(image_tokens));
    task.pixel_mask = mask;
    Tape t;
    auto built = run_single(m, t, std::move(task), false);
    const double* v = t.val(built.pixel_logits[0]);
    const int K = m.cfg.image_codebook;
    std::vector<double> out;
    for (int pix = 0; pix < kTokenCount; ++pix) {
        if (mask[pix] == 0) continue;
        const double* row = v + static_cast<size_t>(Model::pixel_row(pix)) * K;
        out.insert(out.end(), row, row + K);
    }
    return out;
}

std::vector<double> predict_noise(Model& m, const Prefix& prefix, const std::vector<double>& x_t,
                                  int t_step) {
    require_paradigm(m, Paradigm::diffusion, "predict_noise");
    SampleTask task = gen_task(prefix, make_latent_segment(x_t));
    task.t_step = t_step;
    Tape t;
    auto built = run_single(m, t, std::move(task), false);
    return t.val_copy(built.latent_out[0]);
}

std::vector<double> predict_velocity(Model& m, const Prefix& prefix, const std::vector<double>& x_t,
                                     double t_cont) {
    require_paradigm(m, Paradigm::flow, "predict_velocity");
    SampleTask task = gen_task(prefix, make_latent_segment(x_t));
    task.t_cont = t_cont;
    Tape t;
    auto built = run_single(m, t, std::move(task), false);
    return t.val_copy(built.latent_out[0]);
}

std::vector<double> forward_i2t(Model& m, const Prefix& question_and_hv) {
    SampleTask task;
    task.seq.segments = question_and_hv.segments;
    task.seq.segments.push_back(make_text_segment({ans_token()}));
    Tape t;
    auto built = run_single(m, t, std::move(task), false);
    return t.val_copy(built.answer_logits[0]);
}

} // namespace reca
