#pragma once
// The unified multimodal transformer: one trunk serving four generation
// paradigms (AR next-token, masked prediction, DDPM noise prediction,
// rectified-flow velocity) plus the image-to-text answer head.
//
// The trunk attends over whole layout cells (16 image positions of 64 pixel
// slots each); every outside interface — tokens, masks, losses, sampling
// commits — remains per pixel (N = 1024).  Image logits come from per-slot
// factorized readout heads; per-slot embedding tables build the cell rows.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/optim.hpp"
#include "core/tensor.hpp"
#include "model/encoder.hpp"
#include "model/tokenizer.hpp"
#include "model/transformer.hpp"
#include "world/caption.hpp"

namespace reca {

enum class Paradigm { ar, maskgit, diffusion, flow };

std::string paradigm_name(Paradigm p);
Paradigm paradigm_from_name(const std::string& s);

// text-side specials appended after the word vocabulary
int uncond_token();     // stands in for the whole prompt on the unconditional branch
int ans_token();        // query position whose output carries the i2t answer logits
int text_vocab_size();  // words + specials

inline constexpr int kMaxTextLen = 24;

struct ModelConfig {
    int d_model = 128;
    int layers = 4;
    int heads = 4;
    int mlp_mult = 4;
    int text_vocab = 0;  // 0 -> text_vocab_size()
    int image_codebook = kPaletteSize;
    int max_seq_len = 128;
    Paradigm paradigm = Paradigm::maskgit;
    bool shared_und_gen = true;  // understanding i2t shares the trunk with generation
    int t_diff = 50;             // DDPM step count
    double uncond_drop = 0.1;    // conditioning dropout rate during pretraining
    uint64_t seed = 1;
};

// ----- diffusion schedule -----------------------------------------------------

struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta, alpha, alpha_bar;  // index t-1 holds step t

    static NoiseSchedule linear(int T);  // beta linear from 1e-4 to 0.02
    double abar(int t) const;            // t in 0..T; abar(0) = 1
};

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps
std::vector<double> diffusion_forward(const std::vector<double>& x0, int t,
                                      const std::vector<double>& eps, const NoiseSchedule& s);

// ----- unified sequences ------------------------------------------------------

enum class SegKind {
    text_tokens,        // words and specials
    embedding_slots,    // h_v rows from the understanding encoder
    cond_tokens,        // VQ pixel tokens as conditioning (the collapse setup)
    image_tokens,       // generation target as pixel tokens (ar / maskgit)
    continuous_latents  // generation target as x_t patch latents (diffusion / flow)
};

struct Segment {
    SegKind kind = SegKind::text_tokens;
    std::vector<int> tokens;      // text ids, or N pixel tokens for *_tokens kinds
    std::vector<double> rows;     // embedding_slots: l_u x d; latents: 16 x kLatentDim
    int l_u = 0;                  // row count of `rows`
    PaletteImage source{};        // embedding_slots: image the rows came from
    ResizePolicy policy{};        // embedding_slots: resize policy used
    bool differentiable = false;  // embedding_slots: encoder receives gradients
};

struct UnifiedSequence {
    std::vector<Segment> segments;
};

Segment make_text_segment(std::vector<int> tokens);
Segment make_image_segment(std::vector<int> pixel_tokens);
Segment make_latent_segment(std::vector<double> x_t_rows);
Segment make_cond_tokens_segment(std::vector<int> pixel_tokens);

// conditioning-only prefix (no generation target yet)
struct Prefix {
    std::vector<Segment> segments;
};
Prefix text_prefix(const std::vector<int>& tokens);
Prefix uncond_prefix();

// ----- batched graph assembly -------------------------------------------------

enum class TaskGroup { t2i, reca, i2t };

struct SampleTask {
    UnifiedSequence seq;
    TaskGroup group = TaskGroup::t2i;
    std::vector<uint8_t> pixel_mask;      // maskgit: size N, 1 = masked (predicted)
    int t_step = 0;                       // diffusion timestep (1..T)
    double t_cont = 0.0;                  // flow time in [0,1]
    std::vector<double> regress_target;   // eps (diffusion) or eps - x0 (flow)
    int answer = -1;                      // i2t target token
    int ar_prefix_patches = -1;           // ar inference: emit logits for this patch
    double weight = 1.0;
};

class Model {
public:
    ModelConfig cfg;
    TransformerConfig trunk;
    ParamStore params;

    explicit Model(ModelConfig c);

    struct Built {
        // per task; -1 where a node does not apply
        std::vector<Tape::Id> loss;           // scalar
        std::vector<Tape::Id> pixel_logits;   // (N x K) slot-major rows, see pixel_row
        std::vector<Tape::Id> latent_out;     // (16 x kLatentDim) eps-hat / u-hat
        std::vector<Tape::Id> answer_logits;  // (1 x V)
        std::vector<Tape::Id> ar_step_logits;  // (kSlotsPerPatch x K) for ar inference
    };

    // one stacked trunk pass over all tasks; trainable=false binds every
    // parameter as a constant (inference), want_loss=false skips loss nodes
    Built build(Tape& t, const std::vector<SampleTask>& tasks, UnderstandingEncoder* enc,
                bool trainable, bool want_loss);

    // row of pixel `pix` inside a (N x K) pixel_logits node
    static int pixel_row(int pix) { return pixel_slot(pix) * kTrunkPatches + pixel_patch(pix); }
};

// ----- single-sample operations (teacher-forced losses and forwards) ----------

double loss_ar(Model& m, const Prefix& prefix, const std::vector<int>& image_tokens);
double loss_mask(Model& m, const Prefix& prefix, const std::vector<int>& image_tokens,
                 const std::vector<uint8_t>& mask);
double loss_diffusion(Model& m, const Prefix& prefix, const PaletteImage& target, int t,
                      const std::vector<double>& eps);
double loss_flow(Model& m, const Prefix& prefix, const PaletteImage& target, double t,
                 const std::vector<double>& eps);
double loss_i2t(Model& m, const Prefix& question_and_hv, int answer_token);

// logits over the codebook at every pixel position, pixel-raster order (N x K)
std::vector<double> forward_ar_logits(Model& m, const Prefix& prefix,
                                      const std::vector<int>& image_tokens);
// logits at masked positions only, in pixel-raster order (popcount x K)
std::vector<double> forward_maskgit_logits(Model& m, const Prefix& prefix,
                                           const std::vector<int>& image_tokens,
                                           const std::vector<uint8_t>& mask);
// noise / velocity prediction from x_t rows (16 x kLatentDim)
std::vector<double> predict_noise(Model& m, const Prefix& prefix,
                                  const std::vector<double>& x_t, int t);
std::vector<double> predict_velocity(Model& m, const Prefix& prefix,
                                     const std::vector<double>& x_t, double t);
// answer-token logits (size text vocab)
std::vector<double> forward_i2t(Model& m, const Prefix& question_and_hv);

} // namespace reca
