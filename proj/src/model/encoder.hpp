#pragma once
// The trained-then-frozen understanding encoder: a small vision transformer
// over 4x4 RGB patches pretrained on a per-cell attribute-prediction pretext
// (occupancy, shape, color of each layout cell), whose patch embeddings h_v are
// the semantic conditioning signal for reconstruction training.

#include <cstdint>
#include <vector>

#include "core/optim.hpp"
#include "core/tensor.hpp"
#include "model/tokenizer.hpp"
#include "model/transformer.hpp"
#include "world/dataset.hpp"

namespace reca {

struct EncoderConfig {
    int d_model = 128;  // must equal the backbone width: h_v slots in directly
    int heads = 4;
    int layers = 2;
    int patch_px = 4;
    int batch = 16;
    int step_cap = 3000;
    int eval_every = 50;
    double lr = 1e-3;
    double target_accuracy = 0.98;  // early-stop bar on held-out cell attributes
    double floor_accuracy = 0.90;   // below this at the cap is a training failure
    uint64_t seed = 1;
};

// per-cell pretext predictions for one image
struct CellPrediction {
    bool occupied = false;
    int shape = 0;
    int color = 0;
};

struct PretextAccuracy {
    double occupancy = 0;  // all cells
    double shape = 0;      // occupied cells only
    double color = 0;      // occupied cells only
    double cell = 0;       // full attribute triple correct, all cells
};

class UnderstandingEncoder {
public:
    EncoderConfig cfg;
    ParamStore params;
    bool frozen = false;
    mutable int64_t encode_calls = 0;  // call-trace evidence for the inference contract

    explicit UnderstandingEncoder(const EncoderConfig& c);

    // number of h_v rows under a policy: 16 at min resolution, 64 otherwise
    int rows_for(ResizePolicy policy) const;

    // h_v as concrete values, (rows_for x d_model) row-major
    std::vector<double> encode(const PaletteImage& img, ResizePolicy policy) const;

    // encoder forward on an existing tape; trainable=true wires gradients into
    // this->params (the shared-parameter configuration); frozen binding leaves
    // the parameters out of the gradient map entirely
    Tape::Id encode_on_tape(Tape& t, const PaletteImage& img, ResizePolicy policy,
                            bool trainable);

    // pretext-head predictions at min resolution (16 cells)
    std::vector<CellPrediction> predict_cells(const PaletteImage& img) const;

    PretextAccuracy pretext_accuracy(const std::vector<Example>& held) const;
    // same, but with the 16 embedding rows permuted before the heads: shows the
    // features, not the heads, carry the information
    PretextAccuracy shuffled_accuracy(const std::vector<Example>& held, uint64_t seed) const;

private:
    Tape::Id forward_rgb(Tape& t, Binder& bind, const RgbImage& img) const;
    friend UnderstandingEncoder pretrain_understanding(const std::vector<Example>&,
                                                       const std::vector<Example>&,
                                                       const EncoderConfig&);
};

// trains to the target accuracy or the step cap; throws a training error if the
// floor accuracy is not reached by the cap
UnderstandingEncoder pretrain_understanding(const std::vector<Example>& train,
                                            const std::vector<Example>& held,
                                            const EncoderConfig& cfg);

// fresh softmax probe on frozen min-resolution embeddings -> held-out color
// accuracy over occupied cells
double linear_probe_color_accuracy(const UnderstandingEncoder& enc,
                                   const std::vector<Example>& train,
                                   const std::vector<Example>& held, uint64_t seed);

} // namespace reca
