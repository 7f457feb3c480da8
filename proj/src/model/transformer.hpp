#pragma once
// Pre-LN residual transformer trunk shared by the understanding encoder and the
// unified backbone.  Position-wise operations run once over a stack of samples
// (rows concatenated); attention runs per sample with an additive mask.

#include <string>
#include <unordered_map>
#include <vector>

#include "core/optim.hpp"
#include "core/tensor.hpp"

namespace reca {

struct TransformerConfig {
    int d_model = 128;
    int heads = 4;
    int layers = 4;
    int mlp_mult = 4;
};

// Binds named parameters into a tape, once each.  trainable=false emits
// no-gradient leaves, so frozen parameters are absent from the gradient map.
struct Binder {
    Tape& tape;
    ParamStore& ps;
    bool trainable = true;
    std::unordered_map<std::string, Tape::Id> cache;

    Binder(Tape& t, ParamStore& p, bool train) : tape(t), ps(p), trainable(train) {}
    Tape::Id operator()(const std::string& name);
};

// gaussian(0, 0.02) weights, zero biases, unit LayerNorm gains under `prefix`
void init_transformer_params(ParamStore& ps, const std::string& prefix,
                             const TransformerConfig& cfg, uint64_t seed);

// x: (sum_i lens[i]) x d_model stacked rows; masks[i]: additive 0/-1e30
// attention-mask constant of shape lens[i] x lens[i].  Returns the stacked
// output after the final layer norm.
Tape::Id transformer_forward(Tape& t, Binder& bind, const std::string& prefix,
                             const TransformerConfig& cfg, Tape::Id x,
                             const std::vector<Tape::Id>& masks,
                             const std::vector<int>& lens);

// interleaved sin/cos position code over d dims (frequency 10000^(-2i/d))
std::vector<double> sinusoid_embedding(double pos, int d);
// half the dims encode the row, half the column
std::vector<double> sinusoid_2d(int row, int col, int d);

inline constexpr double kMaskOff = -1e30;  // additive value for a blocked edge

} // namespace reca
