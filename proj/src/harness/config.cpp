#include "harness/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace reca {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
    encoder.d_model = model.d_model;
    weights = default_weights(model);
}

namespace {

json to_json_tree(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["train_examples"] = c.train_examples;
    j["held_examples"] = c.held_examples;
    j["world"] = {{"min_objects", c.world.min_objects},
                  {"max_objects", c.world.max_objects},
                  {"color_bias_shape", c.world.color_bias_shape},
                  {"color_bias_color", c.world.color_bias_color},
                  {"color_bias_p", c.world.color_bias_p}};
    j["captions"] = {{"p_color", c.captions.p_color},
                     {"p_position", c.captions.p_position},
                     {"p_count", c.captions.p_count}};
    j["model"] = {{"d_model", c.model.d_model},
                  {"layers", c.model.layers},
                  {"heads", c.model.heads},
                  {"mlp_mult", c.model.mlp_mult},
                  {"paradigm", paradigm_name(c.model.paradigm)},
                  {"shared_und_gen", c.model.shared_und_gen},
                  {"t_diff", c.model.t_diff},
                  {"uncond_drop", c.model.uncond_drop},
                  {"max_seq_len", c.model.max_seq_len}};
    j["encoder"] = {{"layers", c.encoder.layers},
                    {"heads", c.encoder.heads},
                    {"batch", c.encoder.batch},
                    {"step_cap", c.encoder.step_cap},
                    {"lr", c.encoder.lr},
                    {"target_accuracy", c.encoder.target_accuracy},
                    {"floor_accuracy", c.encoder.floor_accuracy}};
    j["weights"] = {{"reca", c.weights.reca}, {"i2t", c.weights.i2t}, {"t2i", c.weights.t2i}};
    j["recipe"] = {{"steps_per_phase", c.recipe.steps_per_phase},
                   {"batch", c.recipe.batch},
                   {"lr", c.recipe.lr},
                   {"pretrain_steps", c.recipe.pretrain_steps},
                   {"pretrain_lr_start", c.recipe.pretrain_lr_start},
                   {"pretrain_lr_end", c.recipe.pretrain_lr_end},
                   {"eval_every", c.recipe.eval_every},
                   {"abort_on_collapse", c.recipe.abort_on_collapse}};
    j["reca"] = {{"source", c.reca.source == RecaCondition::Source::und_encoder ? "und_encoder"
                                                                                : "vq_tokens"},
                 {"resize", resize_mode_name(c.reca.policy.mode)}};
    j["sampler"] = {{"omega", c.sampler.omega},
                    {"temperature", c.sampler.temperature},
                    {"maskgit_steps", c.sampler.maskgit_steps},
                    {"flow_steps", c.sampler.flow_steps}};
    j["eval_prompts_per_subtask"] = c.eval_prompts_per_subtask;
    j["eval_samples_per_prompt"] = c.eval_samples_per_prompt;
    j["out_dir"] = c.out_dir;
    return j;
}

// `at` that names the missing key and rejects unknown siblings on the way out
template <typename T>
void pull(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) fail(Error::Kind::config, std::string("config: missing key '") + key + "'");
    try {
        out = it->template get<T>();
    } catch (const json::exception& e) {
        fail(Error::Kind::config, std::string("config: bad value for '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, const char* scope, std::set<std::string> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            fail(Error::Kind::config,
                 std::string("config: unknown key '") + it.key() + "' in " + scope);
}

ExperimentConfig from_json_tree(const json& j) {
    if (!j.is_object()) fail(Error::Kind::config, "config: top level is not a JSON object");
    check_keys(j, "config",
               {"seed", "train_examples", "held_examples", "world", "captions", "model", "encoder",
                "weights", "recipe", "reca", "sampler", "eval_prompts_per_subtask",
                "eval_samples_per_prompt", "out_dir"});
    ExperimentConfig c;
    pull(j, "seed", c.seed);
    pull(j, "train_examples", c.train_examples);
    pull(j, "held_examples", c.held_examples);

    const json& w = j.at("world");
    check_keys(w, "world",
               {"min_objects", "max_objects", "color_bias_shape", "color_bias_color",
                "color_bias_p"});
    pull(w, "min_objects", c.world.min_objects);
    pull(w, "max_objects", c.world.max_objects);
    pull(w, "color_bias_shape", c.world.color_bias_shape);
    pull(w, "color_bias_color", c.world.color_bias_color);
    pull(w, "color_bias_p", c.world.color_bias_p);

    const json& cap = j.at("captions");
    check_keys(cap, "captions", {"p_color", "p_position", "p_count"});
    pull(cap, "p_color", c.captions.p_color);
    pull(cap, "p_position", c.captions.p_position);
    pull(cap, "p_count", c.captions.p_count);

    const json& m = j.at("model");
    check_keys(m, "model",
               {"d_model", "layers", "heads", "mlp_mult", "paradigm", "shared_und_gen", "t_diff",
                "uncond_drop", "max_seq_len"});
    pull(m, "d_model", c.model.d_model);
    pull(m, "layers", c.model.layers);
    pull(m, "heads", c.model.heads);
    pull(m, "mlp_mult", c.model.mlp_mult);
    std::string para;
    pull(m, "paradigm", para);
    c.model.paradigm = paradigm_from_name(para);
    pull(m, "shared_und_gen", c.model.shared_und_gen);
    pull(m, "t_diff", c.model.t_diff);
    pull(m, "uncond_drop", c.model.uncond_drop);
    pull(m, "max_seq_len", c.model.max_seq_len);
    c.model.seed = c.seed;

    const json& e = j.at("encoder");
    check_keys(e, "encoder",
               {"layers", "heads", "batch", "step_cap", "lr", "target_accuracy", "floor_accuracy"});
    pull(e, "layers", c.encoder.layers);
    pull(e, "heads", c.encoder.heads);
    pull(e, "batch", c.encoder.batch);
    pull(e, "step_cap", c.encoder.step_cap);
    pull(e, "lr", c.encoder.lr);
    pull(e, "target_accuracy", c.encoder.target_accuracy);
    pull(e, "floor_accuracy", c.encoder.floor_accuracy);
    c.encoder.d_model = c.model.d_model;
    c.encoder.seed = c.seed;

    const json& lw = j.at("weights");
    check_keys(lw, "weights", {"reca", "i2t", "t2i"});
    pull(lw, "reca", c.weights.reca);
    pull(lw, "i2t", c.weights.i2t);
    pull(lw, "t2i", c.weights.t2i);

    const json& r = j.at("recipe");
    check_keys(r, "recipe",
               {"steps_per_phase", "batch", "lr", "pretrain_steps", "pretrain_lr_start",
                "pretrain_lr_end", "eval_every", "abort_on_collapse"});
    pull(r, "steps_per_phase", c.recipe.steps_per_phase);
    pull(r, "batch", c.recipe.batch);
    pull(r, "lr", c.recipe.lr);
    pull(r, "pretrain_steps", c.recipe.pretrain_steps);
    pull(r, "pretrain_lr_start", c.recipe.pretrain_lr_start);
    pull(r, "pretrain_lr_end", c.recipe.pretrain_lr_end);
    pull(r, "eval_every", c.recipe.eval_every);
    pull(r, "abort_on_collapse", c.recipe.abort_on_collapse);

    const json& rc = j.at("reca");
    check_keys(rc, "reca", {"source", "resize"});
    std::string source, resize;
    pull(rc, "source", source);
    pull(rc, "resize", resize);
    if (source == "und_encoder")
        c.reca.source = RecaCondition::Source::und_encoder;
    else if (source == "vq_tokens")
        c.reca.source = RecaCondition::Source::vq_tokens;
    else
        fail(Error::Kind::config, "config: unknown reca source '" + source + "'");
    c.reca.policy.mode = resize_mode_from_name(resize);

    const json& s = j.at("sampler");
    check_keys(s, "sampler", {"omega", "temperature", "maskgit_steps", "flow_steps"});
    pull(s, "omega", c.sampler.omega);
    pull(s, "temperature", c.sampler.temperature);
    pull(s, "maskgit_steps", c.sampler.maskgit_steps);
    pull(s, "flow_steps", c.sampler.flow_steps);

    pull(j, "eval_prompts_per_subtask", c.eval_prompts_per_subtask);
    pull(j, "eval_samples_per_prompt", c.eval_samples_per_prompt);
    pull(j, "out_dir", c.out_dir);
    return c;
}

} // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return to_json_tree(cfg).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(Error::Kind::config, std::string("config: parse error: ") + e.what());
    }
    ExperimentConfig c = from_json_tree(j);
    validate_config(c);
    return c;
}

std::string normalized_config(const ExperimentConfig& cfg) {
    // nlohmann::json objects iterate in sorted key order, so a plain dump of
    // the rebuilt tree is already the normalized form
    return to_json_tree(cfg).dump();
}

std::string config_digest(const ExperimentConfig& cfg) {
    const std::string n = normalized_config(cfg);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(n.data(), n.size())));
    return buf;
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Error::Kind::io, "cannot write config file: " + path);
    f << config_to_json(cfg);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(Error::Kind::io, "cannot read config file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return config_from_json(text);
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.train_examples < 1 || cfg.held_examples < 1)
        fail(Error::Kind::config, "config: dataset sizes must be positive");
    if (cfg.world.min_objects < 1 || cfg.world.max_objects > kMaxObjects ||
        cfg.world.min_objects > cfg.world.max_objects)
        fail(Error::Kind::config, "config: object count range invalid");
    for (double p : {cfg.captions.p_color, cfg.captions.p_position, cfg.captions.p_count,
                     cfg.world.color_bias_p, cfg.model.uncond_drop})
        if (p < 0.0 || p > 1.0)
            fail(Error::Kind::config, "config: probabilities must lie in [0,1]");
    if (cfg.encoder.d_model != cfg.model.d_model)
        fail(Error::Kind::config, "config: encoder width must equal backbone width");
    if (cfg.recipe.steps_per_phase < 1 || cfg.recipe.batch < 1 || cfg.recipe.pretrain_steps < 0)
        fail(Error::Kind::config, "config: recipe sizes must be positive");
    if (cfg.recipe.eval_every < 1)
        fail(Error::Kind::config, "config: eval_every must be positive");
    if (cfg.eval_prompts_per_subtask < 1 || cfg.eval_samples_per_prompt < 1)
        fail(Error::Kind::config, "config: eval suite sizes must be positive");
    validate_weights(cfg.model, cfg.weights);  // throws Error::Kind::config on conflict
}

std::string resolve_out_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv(kOutDirEnvVar); env != nullptr && env[0] != '\0')
        return std::string(env) + "/" + cfg.out_dir;
    return cfg.out_dir;
}

} // namespace reca
