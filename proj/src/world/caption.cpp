#include "world/caption.hpp"

#include <sstream>

#include "core/error.hpp"

namespace reca {

const Vocab& vocab() {
    static const Vocab v = [] {
        Vocab vb;
        vb.words = {
            // structure
            "a", "photo", "of", "and", "the", "is", "are", "there", "in", "this", "an", "it",
            // shapes, singular and plural
            "square", "circle", "triangle", "cross",
            "squares", "circles", "triangles", "crosses",
            // colors
            "red", "green", "blue", "yellow", "purple", "orange",
            // counts
            "one", "two", "three", "four",
            // spatial
            "left", "right", "above", "below",
            // questions and description templates
            "what", "color", "shape", "how", "many", "objects", "you", "see", "can",
            "describe", "image", "detail", "detailed", "description", "give", "provide",
            "all", "visual", "elements", "thorough", "examine", "carefully", "contents",
            "does", "show", "offer", "analyze", "tell", "me", "about", "picture",
            "depicted", "account", "comprehensively",
            // punctuation
            ".", "?",
        };
        for (size_t i = 0; i < vb.words.size(); ++i) vb.ids[vb.words[i]] = (int)i;
        return vb;
    }();
    return v;
}

int Vocab::id(const std::string& w) const {
    auto it = ids.find(w);
    if (it == ids.end()) fail(Error::Kind::invalid_arg, "word '" + w + "' not in vocabulary");
    return it->second;
}

std::vector<int> Vocab::tokenize(const std::string& text) const {
    std::vector<int> out;
    std::istringstream ss(text);
    std::string w;
    while (ss >> w) out.push_back(id(w));
    return out;
}

std::string Vocab::text(const std::vector<int>& tokens) const {
    std::string out;
    for (int t : tokens) {
        if (t < 0 || t >= (int)words.size())
            fail(Error::Kind::invalid_arg, "token id " + std::to_string(t) + " out of vocabulary");
        if (!out.empty()) out += " ";
        out += words[t];
    }
    return out;
}

int shape_word(int shape) { return vocab().id(shape_name(shape)); }
int shape_word_plural(int shape) {
    static const char* plural[] = {"squares", "circles", "triangles", "crosses"};
    if (shape < 0 || shape >= kNumShapes)
        fail(Error::Kind::invalid_arg, "shape id " + std::to_string(shape) + " out of range");
    return vocab().id(plural[shape]);
}
int color_word(int color) { return vocab().id(color_name(color)); }
int count_word(int count) {
    static const char* names[] = {"one", "two", "three", "four"};
    if (count < 1 || count > 4)
        fail(Error::Kind::invalid_arg, "count " + std::to_string(count) + " out of range");
    return vocab().id(names[count - 1]);
}

namespace {

void push_words(std::vector<int>& out, std::initializer_list<const char*> ws) {
    for (const char* w : ws) out.push_back(vocab().id(w));
}

void push_object(std::vector<int>& out, const SceneObject& o, bool with_color) {
    push_words(out, {"a"});
    if (with_color) out.push_back(color_word(o.color));
    out.push_back(shape_word(o.shape));
}

} // namespace

Caption make_caption(const Scene& scene, const CaptionConfig& cfg, Rng& rng) {
    if (scene.objects.empty())
        fail(Error::Kind::invalid_arg, "cannot caption an empty scene");
    Caption cap;
    cap.mentions_color = rng.uniform() < cfg.p_color;
    bool want_position = rng.uniform() < cfg.p_position;
    bool want_count = rng.uniform() < cfg.p_count;

    const auto& objs = scene.objects;
    bool all_same_shape = true;
    for (const SceneObject& o : objs) all_same_shape &= (o.shape == objs[0].shape);

    if (want_count && objs.size() >= 2 && all_same_shape) {
        // "a photo of {count} {shape}s"
        cap.template_id = kCapCount;
        cap.mentions_count = true;
        push_words(cap.tokens, {"a", "photo", "of"});
        cap.tokens.push_back(count_word((int)objs.size()));
        cap.tokens.push_back(shape_word_plural(objs[0].shape));
        return cap;
    }

    if (want_position && objs.size() == 2) {
        // "a photo of a [color] {shape} {rel} a [color] {shape}"; objects are
        // sorted by cell, so draw the subject side or "below"/"right" never occur
        int a = (int)rng.below(2);
        const SceneObject& s1 = objs[a];
        const SceneObject& s2 = objs[1 - a];
        // collect every true relation of s1 with respect to s2, then pick one
        std::vector<const char*> rels;
        if (s1.col < s2.col) rels.push_back("left");
        if (s1.col > s2.col) rels.push_back("right");
        if (s1.row < s2.row) rels.push_back("above");
        if (s1.row > s2.row) rels.push_back("below");
        if (!rels.empty()) {
            cap.template_id = kCapPosition;
            cap.mentions_position = true;
            const char* rel = rels[rng.below(rels.size())];
            push_words(cap.tokens, {"a", "photo", "of"});
            push_object(cap.tokens, s1, cap.mentions_color);
            if (rel == std::string("left") || rel == std::string("right"))
                push_words(cap.tokens, {rel, "of"});
            else
                push_words(cap.tokens, {rel});
            push_object(cap.tokens, s2, cap.mentions_color);
            return cap;
        }
    }

    // default list form: "a photo of a [color] {shape} (and a [color] {shape})*"
    cap.template_id = kCapList;
    push_words(cap.tokens, {"a", "photo", "of"});
    for (size_t i = 0; i < objs.size(); ++i) {
        if (i) push_words(cap.tokens, {"and"});
        push_object(cap.tokens, objs[i], cap.mentions_color);
    }
    return cap;
}

std::optional<VqaPair> make_vqa(const Scene& scene, Rng& rng) {
    // shapes with exactly one instance
    int counts[kNumShapes] = {0, 0, 0, 0};
    for (const SceneObject& o : scene.objects) ++counts[o.shape];
    std::vector<int> unique_shapes;
    for (int s = 0; s < kNumShapes; ++s)
        if (counts[s] == 1) unique_shapes.push_back(s);
    if (unique_shapes.empty()) return std::nullopt;
    int shape = unique_shapes[rng.below(unique_shapes.size())];
    int color = -1;
    for (const SceneObject& o : scene.objects)
        if (o.shape == shape) color = o.color;
    VqaPair p;
    push_words(p.question, {"what", "color", "is", "the"});
    p.question.push_back(shape_word(shape));
    push_words(p.question, {"?"});
    p.answer = color_word(color);
    return p;
}

} // namespace reca
