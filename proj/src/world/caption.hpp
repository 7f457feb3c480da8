#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/rng.hpp"
#include "world/scene.hpp"

namespace reca {

// Fixed closed-world vocabulary (~60 words plus punctuation).  Token ids are
// stable: they are the index into the word list below, which never reorders.
struct Vocab {
    std::vector<std::string> words;
    std::unordered_map<std::string, int> ids;

    int id(const std::string& w) const;        // error on unknown word
    int size() const { return (int)words.size(); }
    std::vector<int> tokenize(const std::string& text) const;   // whitespace split
    std::string text(const std::vector<int>& tokens) const;     // space-joined
};

const Vocab& vocab();

int shape_word(int shape);
int shape_word_plural(int shape);
int color_word(int color);
int count_word(int count);  // 1..4 -> one..four

// ----- captions ---------------------------------------------------------------
//
// Captions follow the evaluation template family but are deliberately sparse:
// each attribute class is mentioned with its own probability and an omitted
// attribute is genuinely absent from the string.  Caption strings carry no
// trailing period; evaluation prompts do (" ."), which keeps the training
// corpus free of exact evaluation prompt instantiations by construction.

struct CaptionConfig {
    double p_color = 0.3;
    double p_position = 0.2;
    double p_count = 0.0;  // count is never mentioned in pretraining data
};

// caption template ids
enum : int { kCapList = 0, kCapPosition = 1, kCapCount = 2 };

struct Caption {
    std::vector<int> tokens;
    int template_id = kCapList;
    bool mentions_color = false;
    bool mentions_position = false;
    bool mentions_count = false;
};

Caption make_caption(const Scene& scene, const CaptionConfig& cfg, Rng& rng);

// ----- toy VQA ----------------------------------------------------------------
// "what color is the {shape} ?" with a single color-word answer; only asked
// when the scene contains exactly one object of that shape.

struct VqaPair {
    std::vector<int> question;
    int answer = 0;  // token id of the color word
};

std::optional<VqaPair> make_vqa(const Scene& scene, Rng& rng);

// number of color answers (used by the random-answerer oracle): 6
inline constexpr int kVqaAnswerChoices = kNumColors;

} // namespace reca
