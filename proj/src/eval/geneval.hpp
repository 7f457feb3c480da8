#pragma once
// Compositional text-to-image evaluation on the exactly-decodable world: six
// subtasks (single object, two objects, counting, colors, position, color
// binding), scored by quantize -> decode -> predicate.  An image that fails to
// decode scores false.  Prompt strings end with " ." while training captions
// never do, so no evaluation prompt can appear verbatim in the training
// corpus.

#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "model/backbone.hpp"
#include "model/encoder.hpp"
#include "model/objectives.hpp"
#include "model/samplers.hpp"
#include "world/dataset.hpp"

namespace reca {

enum class Subtask : int {
    single_object = 0,
    two_object = 1,
    counting = 2,
    colors = 3,
    position = 4,
    color_attri = 5,
};
inline constexpr int kSubtaskCount = 6;
const char* subtask_name(Subtask s);

// spatial relation of object a relative to object b
enum : int { kRelLeft = 0, kRelRight = 1, kRelAbove = 2, kRelBelow = 3 };

struct GenevalPrompt {
    Subtask subtask = Subtask::single_object;
    std::vector<int> tokens;  // includes the trailing "." token
    int shape_a = -1, color_a = -1;
    int shape_b = -1, color_b = -1;
    int count = 0;      // counting subtask
    int relation = -1;  // position subtask
};

struct GenevalSuite {
    std::vector<GenevalPrompt> prompts;  // grouped by subtask, per_subtask each
    int per_subtask = 0;

    // the exact prompt strings, for the training-corpus leakage audit
    std::vector<std::string> prompt_strings() const;
};

// deterministic suite with `per_subtask` distinct prompts per subtask
GenevalSuite make_geneval_suite(int per_subtask, uint64_t seed);

// predicate on a decoded scene
bool scene_satisfies(const GenevalPrompt& p, const Scene& s);
// quantize -> decode -> predicate; undecodable images score false
bool score(const GenevalPrompt& p, const PaletteImage& image);
bool score(const GenevalPrompt& p, const RgbImage& image);

// true when no evaluation prompt string occurs inside any caption line
bool leakage_audit(const GenevalSuite& suite, const std::vector<std::string>& caption_lines,
                   std::vector<std::string>* offending = nullptr);

// ----- reports ----------------------------------------------------------------

struct EvalReport {
    double subtask[kSubtaskCount] = {0, 0, 0, 0, 0, 0};
    double overall = 0;  // unweighted mean of the six subtask rates
    int per_subtask = 0;
    int samples_per_prompt = 0;
    int64_t step = -1;
    uint64_t seed = 0;
    std::string config_digest;
};

// samples `samples_per_prompt` images per prompt (each scored on its own) and
// averages; sampling streams derive from (seed, prompt index, sample index)
EvalReport run_geneval(Model& m, const GenevalSuite& suite, const SamplerSettings& ss,
                       int samples_per_prompt, uint64_t seed);

std::string report_json(const EvalReport& r);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& r);

// ----- reconstruction fidelity ------------------------------------------------

struct ReconMetrics {
    double cell_accuracy = 0;   // all 16 cells, full (occupancy, shape, color) triple
    double shape_accuracy = 0;  // cells occupied in the source
    double color_accuracy = 0;  // cells occupied in the source
    double exact_match = 0;     // 1 when every cell matches
};

// per-cell comparison of the generated image against the source scene; a cell
// that is not an exact glyph or background block counts as wrong
ReconMetrics recon_fidelity(const Scene& source, const PaletteImage& generated);

// mean metrics over a probe set, reconstructing through the given conditioning
ReconMetrics recon_probe(Model& m, const UnderstandingEncoder& enc, const TemplateBank& bank,
                         const RecaCondition& cond, const std::vector<Example>& probe,
                         const SamplerSettings& ss, uint64_t seed);

// ----- understanding accuracy -------------------------------------------------

// fraction of single-token color answers correct over held-out scenes that
// admit a question; examples without a unique-shape question are skipped
double i2t_accuracy(Model& m, const UnderstandingEncoder& enc, const std::vector<Example>& held,
                    uint64_t seed);

} // namespace reca
