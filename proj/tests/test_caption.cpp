#include <doctest.h>

#include <cmath>
#include <regex>
#include <set>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "world/caption.hpp"
#include "world/scene.hpp"

using namespace reca;

namespace {

Scene two_object_scene() {
    Scene s;
    s.objects.push_back({kShapeSquare, kRed, 0, 0});
    s.objects.push_back({kShapeCircle, kBlue, 0, 1});
    return s;
}

bool has_color_word(const std::vector<int>& tokens) {
    std::set<int> colors;
    for (int c = 0; c < kNumColors; ++c) colors.insert(color_word(c));
    for (int t : tokens)
        if (colors.count(t)) return true;
    return false;
}

} // namespace

TEST_CASE("vocab: ids are stable, tokenize/text invert, unknown word throws") {
    const Vocab& v = vocab();
    CHECK(v.size() >= 60);
    for (int i = 0; i < v.size(); ++i) CHECK(v.id(v.words[i]) == i);
    std::vector<int> toks = v.tokenize("a photo of a red square");
    CHECK(v.text(toks) == "a photo of a red square");
    CHECK_THROWS_WITH_AS(v.id("zebra"), doctest::Contains("zebra"), Error);
}

TEST_CASE("caption: sparse scene gives 'a photo of a square'") {
    Scene s;
    s.objects.push_back({kShapeSquare, kRed, 1, 1});
    CaptionConfig cfg;
    cfg.p_color = cfg.p_position = cfg.p_count = 0.0;
    Rng rng = rng_stream(1, "cap");
    Caption c = make_caption(s, cfg, rng);
    CHECK(vocab().text(c.tokens) == "a photo of a square");
    CHECK(c.template_id == kCapList);
    CHECK(!c.mentions_color);
}

TEST_CASE("caption: full mention matches the two-object color template") {
    CaptionConfig cfg;
    cfg.p_color = 1.0;
    cfg.p_position = cfg.p_count = 0.0;
    Rng rng = rng_stream(2, "cap");
    Caption c = make_caption(two_object_scene(), cfg, rng);
    CHECK(vocab().text(c.tokens) == "a photo of a red square and a blue circle");
}

TEST_CASE("caption: no trailing period, ever") {
    // eval prompts end with " ." — training captions must not, so the
    // prompt-leakage audit can rely on a plain substring scan
    Rng rng = rng_stream(3, "cap");
    CaptionConfig cfg;
    cfg.p_count = 0.3;
    for (int i = 0; i < 2000; ++i) {
        Scene s = sample_scene(rng);
        Caption c = make_caption(s, cfg, rng);
        CHECK(c.tokens.back() != vocab().id("."));
    }
}

TEST_CASE("caption: mention_color=false leaves no color word in the tokens") {
    Rng rng = rng_stream(4, "cap");
    CaptionConfig cfg;
    for (int i = 0; i < 5000; ++i) {
        Scene s = sample_scene(rng);
        Caption c = make_caption(s, cfg, rng);
        if (!c.mentions_color) CHECK(!has_color_word(c.tokens));
    }
}

TEST_CASE("caption: color mention rate within 2% of p=0.3 over 1e4 captions") {
    Rng rng = rng_stream(5, "cap");
    CaptionConfig cfg;  // p_color = 0.3
    int mentioned = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Scene s = sample_scene(rng);
        if (make_caption(s, cfg, rng).mentions_color) ++mentioned;
    }
    CHECK(std::abs(mentioned / (double)n - cfg.p_color) <= 0.02);
}

TEST_CASE("caption: position rate on two-object scenes tracks p=0.2") {
    Rng rng = rng_stream(6, "cap");
    WorldConfig wc;
    wc.min_objects = wc.max_objects = 2;
    CaptionConfig cfg;  // p_position = 0.2
    int mentioned = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        Scene s = sample_scene(rng, wc);
        if (make_caption(s, cfg, rng).mentions_position) ++mentioned;
    }
    CHECK(std::abs(mentioned / (double)n - cfg.p_position) <= 0.02);
}

TEST_CASE("caption: every caption matches its template regex") {
    const std::string color = "(red|green|blue|yellow|purple|orange)";
    const std::string shape = "(square|circle|triangle|cross)";
    const std::string obj = "a (" + color + " )?" + shape;
    std::regex list_re("a photo of " + obj + "( and " + obj + ")*");
    std::regex pos_re("a photo of " + obj + " (left of|right of|above|below) " + obj);
    std::regex count_re("a photo of (one|two|three|four) (squares|circles|triangles|crosses)");
    Rng rng = rng_stream(7, "cap");
    CaptionConfig cfg;
    cfg.p_count = 0.3;
    bool saw_list = false, saw_pos = false, saw_count = false;
    for (int i = 0; i < 5000; ++i) {
        Scene s = sample_scene(rng);
        Caption c = make_caption(s, cfg, rng);
        std::string text = vocab().text(c.tokens);
        switch (c.template_id) {
            case kCapList: CHECK(std::regex_match(text, list_re)); saw_list = true; break;
            case kCapPosition: CHECK(std::regex_match(text, pos_re)); saw_pos = true; break;
            case kCapCount: CHECK(std::regex_match(text, count_re)); saw_count = true; break;
            default: FAIL("unknown template id ", c.template_id);
        }
    }
    CHECK(saw_list);
    CHECK(saw_pos);
    CHECK(saw_count);
}

TEST_CASE("caption: mentioned attributes are consistent with the scene") {
    Rng rng = rng_stream(8, "cap");
    CaptionConfig cfg;
    cfg.p_color = 1.0;
    cfg.p_position = 0.0;
    for (int i = 0; i < 1000; ++i) {
        Scene s = sample_scene(rng);
        Caption c = make_caption(s, cfg, rng);
        REQUIRE(c.template_id == kCapList);
        // list form with colors: objects appear in sorted order as "a <color> <shape>"
        size_t k = 3;  // skip "a photo of"
        for (const SceneObject& o : s.objects) {
            REQUIRE(k + 2 < c.tokens.size() + 1);
            CHECK(c.tokens[k] == vocab().id("a"));
            CHECK(c.tokens[k + 1] == color_word(o.color));
            CHECK(c.tokens[k + 2] == shape_word(o.shape));
            k += 4;  // skip the "and"
        }
    }
}

TEST_CASE("caption: count form names the plural shape and true count") {
    Scene s;
    s.objects.push_back({kShapeTriangle, kRed, 0, 0});
    s.objects.push_back({kShapeTriangle, kGreen, 1, 2});
    s.objects.push_back({kShapeTriangle, kBlue, 3, 3});
    CaptionConfig cfg;
    cfg.p_color = cfg.p_position = 0.0;
    cfg.p_count = 1.0;
    Rng rng = rng_stream(9, "cap");
    Caption c = make_caption(s, cfg, rng);
    CHECK(c.template_id == kCapCount);
    CHECK(vocab().text(c.tokens) == "a photo of three triangles");
}

TEST_CASE("caption: position relation is true of the scene") {
    Rng rng = rng_stream(10, "cap");
    WorldConfig wc;
    wc.min_objects = wc.max_objects = 2;
    CaptionConfig cfg;
    cfg.p_color = 0.0;
    cfg.p_position = 1.0;
    std::set<int> seen_rels;
    for (int i = 0; i < 2000; ++i) {
        Scene s = sample_scene(rng, wc);
        Caption c = make_caption(s, cfg, rng);
        REQUIRE(c.template_id == kCapPosition);
        // "a photo of a {shape1} {rel...} a {shape2}"
        int sh1 = c.tokens[4];
        int rel = c.tokens[5];
        int sh2 = c.tokens.back();
        const SceneObject* o1 = nullptr;
        const SceneObject* o2 = nullptr;
        for (const SceneObject& o : s.objects) {
            if (shape_word(o.shape) == sh1 && !o1) o1 = &o;
        }
        for (const SceneObject& o : s.objects) {
            if (shape_word(o.shape) == sh2 && &o != o1) o2 = &o;
        }
        if (s.objects[0].shape == s.objects[1].shape) continue;  // ambiguous to read back
        REQUIRE(o1 != nullptr);
        REQUIRE(o2 != nullptr);
        seen_rels.insert(rel);
        if (rel == vocab().id("left")) CHECK(o1->col < o2->col);
        if (rel == vocab().id("right")) CHECK(o1->col > o2->col);
        if (rel == vocab().id("above")) CHECK(o1->row < o2->row);
        if (rel == vocab().id("below")) CHECK(o1->row > o2->row);
    }
    CHECK(seen_rels.size() == 4);  // subject side is drawn, so all four occur
}

TEST_CASE("vqa: unique shape yields a color question with the right answer") {
    Scene s;
    s.objects.push_back({kShapeSquare, kPurple, 2, 3});
    s.objects.push_back({kShapeCircle, kRed, 0, 0});
    Rng rng = rng_stream(11, "cap");
    auto p = make_vqa(s, rng);
    REQUIRE(p.has_value());
    std::string q = vocab().text(p->question);
    bool square_q = q == "what color is the square ?";
    bool circle_q = q == "what color is the circle ?";
    CHECK((square_q || circle_q));
    if (square_q) CHECK(p->answer == color_word(kPurple));
    if (circle_q) CHECK(p->answer == color_word(kRed));
}

TEST_CASE("vqa: no unique shape means no question") {
    Scene s;
    s.objects.push_back({kShapeSquare, kRed, 0, 0});
    s.objects.push_back({kShapeSquare, kBlue, 1, 1});
    Rng rng = rng_stream(12, "cap");
    CHECK(!make_vqa(s, rng).has_value());
}

TEST_CASE("caption: identical rng stream reproduces the caption") {
    Scene s = two_object_scene();
    CaptionConfig cfg;
    Rng a = rng_stream(13, "cap");
    Rng b = rng_stream(13, "cap");
    for (int i = 0; i < 50; ++i) {
        Caption ca = make_caption(s, cfg, a);
        Caption cb = make_caption(s, cfg, b);
        CHECK(ca.tokens == cb.tokens);
        CHECK(ca.template_id == cb.template_id);
    }
}
