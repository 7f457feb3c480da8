#pragma once
// Training objectives: the reconstruction-alignment loss (condition on the
// understanding embeddings of an image, reconstruct that same image), the
// text-to-image and image-to-text losses, and their weighted combination.
// Terms with weight zero are never built, so their parameters see bitwise-zero
// gradients.

#include <string>
#include <vector>

#include "core/rng.hpp"
#include "model/backbone.hpp"
#include "model/encoder.hpp"

namespace reca {

// weights of the combined objective: w_reca * L_reca + w_i2t * L_i2t + w_t2i * L_t2i
struct LossWeights {
    double reca = 1.0;
    double i2t = 1.0;
    double t2i = 0.0;
};

// i2t defaults to 1 on a shared understanding-generation trunk, else 0
LossWeights default_weights(const ModelConfig& cfg);
// negative weights are invalid; i2t > 0 without a shared trunk is a config error
void validate_weights(const ModelConfig& cfg, const LossWeights& w);

// freezes the encoder on a decoupled trunk (and rejects inconsistent weights);
// on a shared trunk the encoder stays trainable
void apply_freeze_policy(UnderstandingEncoder& enc, const ModelConfig& cfg, const LossWeights& w);

// ----- reconstruction templates -----------------------------------------------

// fixed paraphrase bank of "describe the image" style instructions; every
// template is at most 12 tokens from the caption vocabulary
class TemplateBank {
public:
    TemplateBank();
    int size() const { return static_cast<int>(tmpl_.size()); }
    const std::vector<int>& tokens(int i) const;
    std::string text(int i) const;
    const std::vector<int>& pick(Rng& rng) const;

private:
    std::vector<std::vector<int>> tmpl_;
};

// ----- conditioning choice for reconstruction ---------------------------------

struct RecaCondition {
    enum class Source {
        und_encoder,  // h_v from the understanding encoder (the aligned setup)
        vq_tokens     // the image's own pixel tokens (the collapse-prone ablation)
    };
    Source source = Source::und_encoder;
    ResizePolicy policy{ResizeMode::min_resolution};  // encoder input resolution
};

// [template tokens][conditioning] with no generation target attached;
// differentiable=true wires encoder gradients (shared-trunk training)
Prefix reca_prefix(const UnderstandingEncoder& enc, const PaletteImage& image,
                   const std::vector<int>& template_tokens, const RecaCondition& cond,
                   bool differentiable);

// ----- task builders ----------------------------------------------------------

// appends the paradigm-specific generation target for `image` to the task:
// ar appends tokens; maskgit draws a mask ratio u ~ U(0,1] and masks
// max(1, round(u*N)) distinct pixels; diffusion draws t ~ U{1..T} then noise;
// flow draws t ~ U[0,1) then noise
void attach_generation_target(const Model& m, SampleTask& task, const PaletteImage& image, Rng& rng);

SampleTask build_reca_task(const Model& m, const UnderstandingEncoder& enc,
                           const PaletteImage& image, const std::vector<int>& template_tokens,
                           const RecaCondition& cond, bool differentiable, Rng& rng,
                           bool drop_conditioning = false);
SampleTask build_t2i_task(const Model& m, const std::vector<int>& caption,
                          const PaletteImage& image, bool drop_conditioning, Rng& rng);
SampleTask build_i2t_task(const UnderstandingEncoder& enc, const std::vector<int>& question,
                          int answer, const PaletteImage& image, bool differentiable);

// [question][h_v at minimum resolution], ready for the answer query
Prefix i2t_prefix(const UnderstandingEncoder& enc, const std::vector<int>& question,
                  const PaletteImage& image);

// ----- single-sample losses ---------------------------------------------------

double loss_reca(Model& m, const UnderstandingEncoder& enc, const PaletteImage& image,
                 const std::vector<int>& template_tokens, const RecaCondition& cond, Rng& rng);
double loss_t2i(Model& m, const std::vector<int>& caption, const PaletteImage& image, Rng& rng);

// ----- combined objective -----------------------------------------------------

// weighted per-group means over the tasks; tasks whose group carries weight
// zero are dropped before any graph is built
Tape::Id total_loss(Tape& t, Model& m, UnderstandingEncoder* enc,
                    const std::vector<SampleTask>& tasks, const LossWeights& w, bool trainable);

} // namespace reca
