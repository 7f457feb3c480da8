#include "model/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace reca {

namespace {

// flattened 4x4 RGB patches, row-major over the patch grid
std::vector<double> patch_rows(const RgbImage& img, int patch_px) {
    int grid = img.h / patch_px;
    int pd = patch_px * patch_px * 3;
    std::vector<double> rows((size_t)grid * grid * pd);
    for (int pr = 0; pr < grid; ++pr)
        for (int pc = 0; pc < grid; ++pc) {
            double* row = rows.data() + ((size_t)pr * grid + pc) * pd;
            for (int r = 0; r < patch_px; ++r)
                for (int c = 0; c < patch_px; ++c) {
                    const double* px = img.px(pr * patch_px + r, pc * patch_px + c);
                    for (int k = 0; k < 3; ++k) row[(r * patch_px + c) * 3 + k] = px[k];
                }
        }
    return rows;
}

std::vector<double> grid_pos_rows(int grid, int d) {
    std::vector<double> rows((size_t)grid * grid * d);
    for (int pr = 0; pr < grid; ++pr)
        for (int pc = 0; pc < grid; ++pc) {
            std::vector<double> p = sinusoid_2d(pr, pc, d);
            std::copy(p.begin(), p.end(), rows.begin() + ((size_t)pr * grid + pc) * d);
        }
    return rows;
}

int matvec_argmax(const std::vector<double>& w, const std::vector<double>& b, const double* x,
                  int d, int classes) {
    std::vector<double> logits(classes);
    for (int j = 0; j < classes; ++j) {
        double s = b[j];
        for (int i = 0; i < d; ++i) s += x[i] * w[(size_t)i * classes + j];
        logits[j] = s;
    }
    return argmax_lowest(logits.data(), classes);
}

} // namespace

UnderstandingEncoder::UnderstandingEncoder(const EncoderConfig& c) : cfg(c) {
    if (kImagePx % c.patch_px != 0 || (kImagePx / 2) % c.patch_px != 0)
        fail(Error::Kind::config, "encoder patch size must divide both input resolutions");
    int pd = c.patch_px * c.patch_px * 3;
    params.add_gaussian("patch/w", {pd, c.d_model}, 0.02, c.seed);
    params.add_zeros("patch/b", {c.d_model});
    TransformerConfig tc{c.d_model, c.heads, c.layers, 4};
    init_transformer_params(params, "trunk/", tc, c.seed);
    params.add_gaussian("head/occ_w", {c.d_model, 2}, 0.02, c.seed);
    params.add_zeros("head/occ_b", {2});
    params.add_gaussian("head/shape_w", {c.d_model, kNumShapes}, 0.02, c.seed);
    params.add_zeros("head/shape_b", {kNumShapes});
    params.add_gaussian("head/color_w", {c.d_model, kNumColors}, 0.02, c.seed);
    params.add_zeros("head/color_b", {kNumColors});
}

int UnderstandingEncoder::rows_for(ResizePolicy policy) const {
    int side = policy.mode == ResizeMode::min_resolution ? kImagePx / 2 : kImagePx;
    int grid = side / cfg.patch_px;
    return grid * grid;
}

Tape::Id UnderstandingEncoder::forward_rgb(Tape& t, Binder& bind, const RgbImage& img) const {
    int grid = img.h / cfg.patch_px;
    int pd = cfg.patch_px * cfg.patch_px * 3;
    Tape::Id x = t.constant(patch_rows(img, cfg.patch_px), {grid * grid, pd});
    Tape::Id e = t.add_rowvec(t.matmul(x, bind("patch/w")), bind("patch/b"));
    Tape::Id pos = t.constant(grid_pos_rows(grid, cfg.d_model), {grid * grid, cfg.d_model});
    Tape::Id h = t.add(e, pos);
    int L = grid * grid;
    Tape::Id mask = t.constant(std::vector<double>((size_t)L * L, 0.0), {L, L});
    TransformerConfig tc{cfg.d_model, cfg.heads, cfg.layers, 4};
    return transformer_forward(t, bind, "trunk/", tc, h, {mask}, {L});
}

std::vector<double> UnderstandingEncoder::encode(const PaletteImage& img,
                                                 ResizePolicy policy) const {
    ++encode_calls;
    Tape t;
    auto* self = const_cast<UnderstandingEncoder*>(this);  // read-only binding
    Binder bind(t, self->params, false);
    Tape::Id out = forward_rgb(t, bind, resize_for_encoder(img, policy));
    return t.val_copy(out);
}

Tape::Id UnderstandingEncoder::encode_on_tape(Tape& t, const PaletteImage& img,
                                              ResizePolicy policy, bool trainable) {
    if (trainable && frozen)
        fail(Error::Kind::state, "encoder is frozen; cannot build a trainable forward");
    ++encode_calls;
    Binder bind(t, params, trainable);
    return forward_rgb(t, bind, resize_for_encoder(img, policy));
}

std::vector<CellPrediction> UnderstandingEncoder::predict_cells(const PaletteImage& img) const {
    std::vector<double> rows = encode(img, {ResizeMode::min_resolution});
    const int d = cfg.d_model;
    std::vector<CellPrediction> out(kTrunkPatches);
    for (int cell = 0; cell < kTrunkPatches; ++cell) {
        const double* row = rows.data() + (size_t)cell * d;
        CellPrediction p;
        p.occupied = matvec_argmax(params.at("head/occ_w").w, params.at("head/occ_b").w, row, d,
                                   2) == 1;
        p.shape = matvec_argmax(params.at("head/shape_w").w, params.at("head/shape_b").w, row, d,
                                kNumShapes);
        p.color = matvec_argmax(params.at("head/color_w").w, params.at("head/color_b").w, row, d,
                                kNumColors);
        out[cell] = p;
    }
    return out;
}

namespace {

PretextAccuracy score_predictions(
    const std::vector<Example>& held,
    const std::function<std::vector<CellPrediction>(const Example&)>& predict) {
    long occ_ok = 0, occ_n = 0, shp_ok = 0, col_ok = 0, occupied_n = 0, cell_ok = 0;
    for (const Example& ex : held) {
        std::vector<CellPrediction> pred = predict(ex);
        for (int r = 0; r < kGridCells; ++r)
            for (int c = 0; c < kGridCells; ++c) {
                const SceneObject* o = ex.scene.at(r, c);
                const CellPrediction& p = pred[r * kGridCells + c];
                ++occ_n;
                if (p.occupied == (o != nullptr)) ++occ_ok;
                if (o) {
                    ++occupied_n;
                    if (p.shape == o->shape) ++shp_ok;
                    if (p.color == o->color) ++col_ok;
                    if (p.occupied && p.shape == o->shape && p.color == o->color) ++cell_ok;
                } else if (!p.occupied) {
                    ++cell_ok;
                }
            }
    }
    PretextAccuracy a;
    a.occupancy = (double)occ_ok / occ_n;
    a.shape = occupied_n ? (double)shp_ok / occupied_n : 0.0;
    a.color = occupied_n ? (double)col_ok / occupied_n : 0.0;
    a.cell = (double)cell_ok / occ_n;
    return a;
}

} // namespace

PretextAccuracy UnderstandingEncoder::pretext_accuracy(const std::vector<Example>& held) const {
    return score_predictions(held, [&](const Example& ex) { return predict_cells(ex.image); });
}

PretextAccuracy UnderstandingEncoder::shuffled_accuracy(const std::vector<Example>& held,
                                                        uint64_t seed) const {
    Rng rng = rng_stream(seed, "enc/shuffle");
    const int d = cfg.d_model;
    return score_predictions(held, [&](const Example& ex) {
        std::vector<double> rows = encode(ex.image, {ResizeMode::min_resolution});
        std::vector<int> perm(kTrunkPatches);
        for (int i = 0; i < kTrunkPatches; ++i) perm[i] = i;
        for (int i = kTrunkPatches - 1; i > 0; --i)
            std::swap(perm[i], perm[rng.below(i + 1)]);
        std::vector<CellPrediction> out(kTrunkPatches);
        for (int cell = 0; cell < kTrunkPatches; ++cell) {
            const double* row = rows.data() + (size_t)perm[cell] * d;
            CellPrediction p;
            p.occupied = matvec_argmax(params.at("head/occ_w").w, params.at("head/occ_b").w, row,
                                       d, 2) == 1;
            p.shape = matvec_argmax(params.at("head/shape_w").w, params.at("head/shape_b").w, row,
                                    d, kNumShapes);
            p.color = matvec_argmax(params.at("head/color_w").w, params.at("head/color_b").w, row,
                                    d, kNumColors);
            out[cell] = p;
        }
        return out;
    });
}

UnderstandingEncoder pretrain_understanding(const std::vector<Example>& train,
                                            const std::vector<Example>& held,
                                            const EncoderConfig& cfg) {
    if (train.empty() || held.empty())
        fail(Error::Kind::invalid_arg, "encoder pretraining needs train and held-out examples");
    UnderstandingEncoder enc(cfg);
    AdamW opt;
    opt.lr = cfg.lr;
    const int d = cfg.d_model;
    const int grid = kGridCells;  // min-resolution: one patch per layout cell
    TransformerConfig tc{cfg.d_model, cfg.heads, cfg.layers, 4};
    double best_cell = 0.0;
    for (int step = 1; step <= cfg.step_cap; ++step) {
        Rng rng = rng_stream(cfg.seed, "enc/train", step);
        enc.params.zero_grads();
        Tape t;
        Binder bind(t, enc.params, true);
        // stack the batch: position-wise ops run once over all samples
        std::vector<Tape::Id> sample_x;
        std::vector<int> occ_targets, shape_targets, color_targets, occupied_rows;
        for (int b = 0; b < cfg.batch; ++b) {
            const Example& ex = train[rng.below(train.size())];
            RgbImage rgb = resize_for_encoder(ex.image, {ResizeMode::min_resolution});
            sample_x.push_back(
                t.constant(patch_rows(rgb, cfg.patch_px), {grid * grid, cfg.patch_px * cfg.patch_px * 3}));
            for (int r = 0; r < grid; ++r)
                for (int c = 0; c < grid; ++c) {
                    const SceneObject* o = ex.scene.at(r, c);
                    occ_targets.push_back(o ? 1 : 0);
                    if (o) {
                        occupied_rows.push_back(b * kTrunkPatches + r * grid + c);
                        shape_targets.push_back(o->shape);
                        color_targets.push_back(o->color);
                    }
                }
        }
        Tape::Id x = t.concat_rows(sample_x);
        Tape::Id e = t.add_rowvec(t.matmul(x, bind("patch/w")), bind("patch/b"));
        std::vector<double> pos1 = grid_pos_rows(grid, d);
        std::vector<double> pos;
        for (int b = 0; b < cfg.batch; ++b) pos.insert(pos.end(), pos1.begin(), pos1.end());
        Tape::Id h = t.add(e, t.constant(std::move(pos), {cfg.batch * kTrunkPatches, d}));
        Tape::Id mask =
            t.constant(std::vector<double>((size_t)kTrunkPatches * kTrunkPatches, 0.0),
                       {kTrunkPatches, kTrunkPatches});
        std::vector<Tape::Id> masks(cfg.batch, mask);
        std::vector<int> lens(cfg.batch, kTrunkPatches);
        Tape::Id out = transformer_forward(t, bind, "trunk/", tc, h, masks, lens);
        Tape::Id occ_logits =
            t.add_rowvec(t.matmul(out, bind("head/occ_w")), bind("head/occ_b"));
        Tape::Id occ_ce = t.cross_entropy(occ_logits, occ_targets);
        Tape::Id occ_rows = t.gather_rows(out, occupied_rows);
        Tape::Id shp_ce = t.cross_entropy(
            t.add_rowvec(t.matmul(occ_rows, bind("head/shape_w")), bind("head/shape_b")),
            shape_targets);
        Tape::Id col_ce = t.cross_entropy(
            t.add_rowvec(t.matmul(occ_rows, bind("head/color_w")), bind("head/color_b")),
            color_targets);
        Tape::Id loss = t.add(t.add(occ_ce, shp_ce), col_ce);
        t.backward(loss);
        opt.step(enc.params);
        if (step % cfg.eval_every == 0 || step == cfg.step_cap) {
            PretextAccuracy a = enc.pretext_accuracy(held);
            best_cell = std::max(best_cell, a.cell);
            if (a.cell >= cfg.target_accuracy) return enc;
        }
    }
    if (best_cell < cfg.floor_accuracy)
        fail(Error::Kind::training,
             "encoder pretext training stalled: best cell-attribute accuracy " +
                 std::to_string(best_cell) + " below floor " +
                 std::to_string(cfg.floor_accuracy) + " at the step cap");
    return enc;
}

double linear_probe_color_accuracy(const UnderstandingEncoder& enc,
                                   const std::vector<Example>& train,
                                   const std::vector<Example>& held, uint64_t seed) {
    const int d = enc.cfg.d_model;
    auto gather = [&](const std::vector<Example>& exs, std::vector<double>& rows,
                      std::vector<int>& labels) {
        for (const Example& ex : exs) {
            std::vector<double> emb = enc.encode(ex.image, {ResizeMode::min_resolution});
            for (const SceneObject& o : ex.scene.objects) {
                const double* r = emb.data() + (size_t)(o.row * kGridCells + o.col) * d;
                rows.insert(rows.end(), r, r + d);
                labels.push_back(o.color);
            }
        }
    };
    std::vector<double> train_rows, held_rows;
    std::vector<int> train_labels, held_labels;
    gather(train, train_rows, train_labels);
    gather(held, held_rows, held_labels);

    ParamStore probe;
    probe.add_gaussian("w", {d, kNumColors}, 0.02, seed);
    probe.add_zeros("b", {kNumColors});
    AdamW opt;
    opt.lr = 1e-2;
    int n = (int)train_labels.size();
    for (int step = 0; step < 300; ++step) {
        probe.zero_grads();
        Tape t;
        Binder bind(t, probe, true);
        Tape::Id x = t.leaf(train_rows.data(), {n, d}, false);
        Tape::Id logits = t.add_rowvec(t.matmul(x, bind("w")), bind("b"));
        t.backward(t.cross_entropy(logits, train_labels));
        opt.step(probe);
    }
    long ok = 0;
    for (size_t i = 0; i < held_labels.size(); ++i)
        if (matvec_argmax(probe.at("w").w, probe.at("b").w, held_rows.data() + i * d, d,
                          kNumColors) == held_labels[i])
            ++ok;
    return held_labels.empty() ? 0.0 : (double)ok / held_labels.size();
}

} // namespace reca
