#pragma once
// Inference-time samplers for the four paradigms.  All share classifier-free
// guidance o = o_c + omega * (o_c - o_u), where the unconditional branch runs
// the same model under the [UNCOND] prefix.  omega = 0 skips that branch and
// returns the conditional output unchanged.

#include <cstdint>
#include <vector>

#include "core/rng.hpp"
#include "model/backbone.hpp"
#include "model/objectives.hpp"

namespace reca {

struct SamplerSettings {
    double omega = 1.5;          // guidance weight, must be >= 0
    double temperature = 1.0;    // softmax temperature for token draws; 0 = greedy
    int maskgit_steps = 8;       // T: number of reveal rounds
    int flow_steps = 25;         // Euler steps from t=1 to t=0
    bool ddpm_mean_only = false; // drop the per-step noise term (deterministic chain)
};

// o = cond + omega * (cond - uncond); omega == 0 returns cond bit-for-bit
std::vector<double> cfg_combine(const std::vector<double>& cond,
                                const std::vector<double>& uncond, double omega);

// tokens still masked after each reveal round: floor(n * cos(pi/2 * t/steps)),
// t = 1..steps; non-increasing and ending at 0
std::vector<int> maskgit_schedule(int n, int steps);

struct MaskgitTrace {
    std::vector<std::vector<int>> tokens_after_step;
    std::vector<std::vector<uint8_t>> masked_after_step;
};

// cell-by-cell decode; each cell's 64 pixel draws factorize from one forward
std::vector<int> sample_ar_tokens(Model& m, const Prefix& prefix, const SamplerSettings& s, Rng& rng);

// iterative reveal: per round, draw candidates at every masked pixel, then
// commit the highest-confidence ones (confidence = max post-guidance softmax
// probability, ties to the lower pixel index); committed pixels are immutable
std::vector<int> sample_maskgit_tokens(Model& m, const Prefix& prefix, const SamplerSettings& s,
                                       Rng& rng, MaskgitTrace* trace = nullptr);

// ancestral DDPM from x_T ~ N(0,I); sigma_t^2 = beta_t, zero at the final step
std::vector<double> sample_diffusion_latents(Model& m, const Prefix& prefix,
                                             const SamplerSettings& s, Rng& rng);

// Euler integration of the learned velocity from t=1 down to 0
std::vector<double> sample_flow_latents(Model& m, const Prefix& prefix, const SamplerSettings& s,
                                        Rng& rng);

// paradigm dispatch; latent paradigms quantize the decoded RGB to the palette
PaletteImage sample_image(Model& m, const Prefix& prefix, const SamplerSettings& s, Rng& rng);

// text-to-image entry point: the prompt alone conditions the sample, and the
// understanding encoder is never invoked on this path
PaletteImage sample_t2i(Model& m, const std::vector<int>& caption_tokens,
                        const SamplerSettings& s, Rng& rng);

// reconstruction entry point: template plus conditioning drawn from `image`
PaletteImage reconstruct(Model& m, const UnderstandingEncoder& enc, const PaletteImage& image,
                         const std::vector<int>& template_tokens, const RecaCondition& cond,
                         const SamplerSettings& s, Rng& rng);

} // namespace reca
