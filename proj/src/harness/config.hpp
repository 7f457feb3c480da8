#pragma once
// Experiment configuration: one JSON-serializable bundle covering the world,
// the model, the training recipe, and the evaluation suite.  The normalized
// (sorted-key) JSON form is hashed into a digest that ties ledgers, metrics,
// and checkpoints back to the exact configuration that produced them.

#include <cstdint>
#include <string>

#include "model/backbone.hpp"
#include "model/encoder.hpp"
#include "model/objectives.hpp"
#include "model/samplers.hpp"
#include "world/caption.hpp"
#include "world/scene.hpp"

namespace reca {

// training-loop shape shared by pretraining and every post-training recipe
struct RecipeConfig {
    int steps_per_phase = 2000;  // per post-training phase
    int batch = 32;              // tasks per optimizer step
    double lr = 3e-4;            // post-training learning rate (constant)
    int pretrain_steps = 16000;
    double pretrain_lr_start = 1e-3;  // cosine-decayed over pretraining
    double pretrain_lr_end = 1e-4;
    int eval_every = 500;             // periodic-eval cadence inside a phase
    bool abort_on_collapse = false;   // off by default: ledgers should record it
};

struct ExperimentConfig {
    uint64_t seed = 1;
    int train_examples = 3000;
    int held_examples = 240;
    WorldConfig world;
    CaptionConfig captions;
    ModelConfig model;
    EncoderConfig encoder;  // d_model is forced to model.d_model on validation
    LossWeights weights;
    RecipeConfig recipe;
    RecaCondition reca;
    SamplerSettings sampler;
    int eval_prompts_per_subtask = 8;
    int eval_samples_per_prompt = 4;
    std::string out_dir = "out";

    ExperimentConfig();  // weights default from the model sharing flag
};

// emit / parse the JSON form; parse rejects unknown keys and re-validates
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

// sorted-key single-line form; parse(emit(cfg)) == cfg and digests are stable
std::string normalized_config(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);  // 16 hex chars

void save_config(const std::string& path, const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// cross-field checks (weights vs sharing, encoder width, positive sizes...)
void validate_config(const ExperimentConfig& cfg);

// output root: the config's out_dir unless the environment overrides it
std::string resolve_out_dir(const ExperimentConfig& cfg);
inline constexpr const char* kOutDirEnvVar = "RECALAB_OUT";

} // namespace reca
