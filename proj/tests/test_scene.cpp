#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "world/dataset.hpp"
#include "world/scene.hpp"

using namespace reca;

TEST_CASE("sample_scene: max_objects=1 gives exactly one object") {
    Rng rng = rng_stream(1, "scene");
    WorldConfig cfg;
    cfg.min_objects = cfg.max_objects = 1;
    for (int i = 0; i < 100; ++i) CHECK(sample_scene(rng, cfg).objects.size() == 1);
}

TEST_CASE("sample_scene: cells distinct, fields in range, sorted order") {
    Rng rng = rng_stream(2, "scene");
    for (int i = 0; i < 1000; ++i) {
        Scene s = sample_scene(rng);
        std::set<std::pair<int, int>> cells;
        for (size_t j = 0; j < s.objects.size(); ++j) {
            const SceneObject& o = s.objects[j];
            CHECK(o.shape >= 0);
            CHECK(o.shape < kNumShapes);
            CHECK(o.color >= 0);
            CHECK(o.color < kNumColors);
            CHECK(o.row >= 0);
            CHECK(o.row < kGridCells);
            CHECK(o.col >= 0);
            CHECK(o.col < kGridCells);
            CHECK(cells.insert({o.row, o.col}).second);
            if (j > 0) {
                const SceneObject& p = s.objects[j - 1];
                CHECK(std::make_pair(p.row, p.col) < std::make_pair(o.row, o.col));
            }
        }
        CHECK(s.objects.size() >= 1);
        CHECK(s.objects.size() <= (size_t)kMaxObjects);
    }
}

TEST_CASE("sample_scene: 1e4 samples put each color within 3 sigma of uniform") {
    Rng rng = rng_stream(3, "scene");
    long counts[kNumColors] = {};
    long total = 0;
    for (int i = 0; i < 10000; ++i)
        for (const SceneObject& o : sample_scene(rng).objects) {
            ++counts[o.color];
            ++total;
        }
    const double p = 1.0 / kNumColors;
    const double sigma = std::sqrt(total * p * (1 - p));
    for (int c = 0; c < kNumColors; ++c)
        CHECK(std::abs(counts[c] - total * p) <= 3 * sigma);
}

TEST_CASE("sample_scene: color bias knob forces the color with probability p") {
    Rng rng = rng_stream(4, "scene");
    WorldConfig cfg;
    cfg.color_bias_shape = kShapeSquare;
    cfg.color_bias_color = kRed;
    cfg.color_bias_p = 0.8;
    long squares = 0, red_squares = 0, other_red = 0, other_total = 0;
    for (int i = 0; i < 20000; ++i)
        for (const SceneObject& o : sample_scene(rng, cfg).objects) {
            if (o.shape == kShapeSquare) {
                ++squares;
                if (o.color == kRed) ++red_squares;
            } else {
                ++other_total;
                if (o.color == kRed) ++other_red;
            }
        }
    double sigma_sq = std::sqrt(squares * 0.8 * 0.2);
    CHECK(std::abs(red_squares - 0.8 * squares) <= 3 * sigma_sq);
    // unbiased shapes stay uniform
    double p = 1.0 / kNumColors;
    double sigma_o = std::sqrt(other_total * p * (1 - p));
    CHECK(std::abs(other_red - p * other_total) <= 3 * sigma_o);
}

TEST_CASE("render: single square at (0,0) paints only cell (0,0)") {
    Scene s;
    s.objects.push_back({kShapeSquare, kRed, 0, 0});
    PaletteImage img = render_scene(s);
    bool ink_in_cell = false;
    for (int r = 0; r < kImagePx; ++r)
        for (int c = 0; c < kImagePx; ++c) {
            uint8_t v = img.at(r, c);
            if (r < kCellPx && c < kCellPx) {
                if (v != 0) {
                    CHECK(v == kRed + 1);
                    ink_in_cell = true;
                }
            } else {
                CHECK(v == 0);  // empty-adjacent cells stay background
            }
        }
    CHECK(ink_in_cell);
}

TEST_CASE("render: glyphs never touch cell borders") {
    for (int shape = 0; shape < kNumShapes; ++shape) {
        const auto& g = glyph_mask(shape);
        for (int i = 0; i < kCellPx; ++i) {
            CHECK(g[0 * kCellPx + i] == 0);
            CHECK(g[(kCellPx - 1) * kCellPx + i] == 0);
            CHECK(g[i * kCellPx + 0] == 0);
            CHECK(g[i * kCellPx + (kCellPx - 1)] == 0);
        }
    }
}

TEST_CASE("glyphs: pairwise distinct at full resolution and after 2x2 majority vote") {
    // the 2x2-majority property is what keeps the min-resolution view injective
    auto majority = [](const std::array<uint8_t, kCellPx * kCellPx>& g) {
        std::array<uint8_t, 16> out{};
        for (int br = 0; br < 4; ++br)
            for (int bc = 0; bc < 4; ++bc) {
                int ink = 0;
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc)
                        ink += g[(br * 2 + dr) * kCellPx + (bc * 2 + dc)];
                out[br * 4 + bc] = ink >= 3 ? 1 : 0;  // ties go to background
            }
        return out;
    };
    for (int a = 0; a < kNumShapes; ++a) {
        CHECK(majority(glyph_mask(a)) != std::array<uint8_t, 16>{});  // survives downsample
        for (int b = a + 1; b < kNumShapes; ++b) {
            CHECK(glyph_mask(a) != glyph_mask(b));
            CHECK(majority(glyph_mask(a)) != majority(glyph_mask(b)));
        }
    }
}

TEST_CASE("decode: all-background image decodes to the empty scene") {
    PaletteImage img{};
    DecodeResult res = try_decode(img);
    CHECK(res.ok);
    CHECK(res.scene.objects.empty());
}

TEST_CASE("decode(render(s)) == s for 1e4 random scenes") {
    Rng rng = rng_stream(5, "scene");
    for (int i = 0; i < 10000; ++i) {
        Scene s = sample_scene(rng);
        Scene back = decode_image(render_scene(s));
        REQUIRE(back == s);
    }
}

TEST_CASE("decode: one corrupted pixel flags exactly that cell") {
    Scene s;
    s.objects.push_back({kShapeCircle, kBlue, 1, 2});
    s.objects.push_back({kShapeCross, kGreen, 3, 0});
    PaletteImage img = render_scene(s);
    // flip one pixel inside the circle's cell (cell (1,2) spans rows 8..15, cols 16..23)
    img.at(11, 19) = img.at(11, 19) == 0 ? (uint8_t)(kBlue + 1) : (uint8_t)0;
    DecodeResult res = try_decode(img);
    CHECK(!res.ok);
    REQUIRE(res.bad_cells.size() == 1);
    CHECK(res.bad_cells[0] == 1 * kGridCells + 2);
    CHECK_THROWS_WITH_AS(decode_image(img), doctest::Contains("(1,2)"), Error);
}

TEST_CASE("decode: wrong-color pixel in an otherwise valid glyph is rejected") {
    Scene s;
    s.objects.push_back({kShapeSquare, kRed, 2, 2});
    PaletteImage img = render_scene(s);
    // recolor one ink pixel: shape matches but the cell is no longer a uniform glyph
    bool done = false;
    for (int r = 16; r < 24 && !done; ++r)
        for (int c = 16; c < 24 && !done; ++c)
            if (img.at(r, c) == kRed + 1) {
                img.at(r, c) = kGreen + 1;
                done = true;
            }
    REQUIRE(done);
    CHECK(!try_decode(img).ok);
}

TEST_CASE("quantize_to_palette: exact colors map to themselves") {
    Rng rng = rng_stream(6, "scene");
    Scene s = sample_scene(rng);
    PaletteImage img = render_scene(s);
    CHECK(quantize_to_palette(to_rgb(img)).idx == img.idx);
}

TEST_CASE("quantize_to_palette: midpoint ties break toward the lower index") {
    RgbImage mid(kImagePx, kImagePx);
    const auto& a = palette_rgb(0);
    const auto& b = palette_rgb(1);
    for (int r = 0; r < kImagePx; ++r)
        for (int c = 0; c < kImagePx; ++c)
            for (int k = 0; k < 3; ++k) mid.px(r, c)[k] = 0.5 * (a[k] + b[k]);
    PaletteImage q = quantize_to_palette(mid);
    for (uint8_t v : q.idx) CHECK(v == 0);
}

TEST_CASE("quantize_to_palette: noise always yields valid indices") {
    Rng rng = rng_stream(7, "scene");
    RgbImage noise(kImagePx, kImagePx);
    for (double& x : noise.v) x = rng.uniform(-0.5, 1.5);
    for (uint8_t v : quantize_to_palette(noise).idx) CHECK(v < kPaletteSize);
}

TEST_CASE("scene key and hash are stable and separate distinct scenes") {
    Rng rng = rng_stream(8, "scene");
    std::set<std::string> keys;
    std::set<uint64_t> hashes;
    for (int i = 0; i < 500; ++i) {
        Scene s = sample_scene(rng);
        CHECK(s.key() == s.key());
        keys.insert(s.key());
        hashes.insert(s.hash());
    }
    CHECK(keys.size() == hashes.size());  // no collisions among sampled keys
}

TEST_CASE("dataset: jsonl roundtrip preserves scenes, captions, sparsity") {
    WorldConfig wc;
    CaptionConfig cc;
    auto examples = make_examples(64, wc, cc, 99, "train");
    const char* path = "test_dataset_roundtrip.jsonl";
    write_examples_jsonl(path, examples);
    auto back = read_examples_jsonl(path);
    REQUIRE(back.size() == examples.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].scene == examples[i].scene);
        CHECK(back[i].caption.tokens == examples[i].caption.tokens);
        CHECK(back[i].caption.template_id == examples[i].caption.template_id);
        CHECK(back[i].caption.mentions_color == examples[i].caption.mentions_color);
        CHECK(back[i].image.idx == examples[i].image.idx);
    }
    std::remove(path);
}

TEST_CASE("dataset: ppm dump carries a lossless palette sidecar") {
    Rng rng = rng_stream(9, "scene");
    PaletteImage img = render_scene(sample_scene(rng));
    const char* path = "test_dump.ppm";
    write_ppm_with_sidecar(path, img);
    PaletteImage back = read_palette_sidecar(std::string(path) + ".idx");
    CHECK(back.idx == img.idx);
    // PPM header sanity
    FILE* f = std::fopen(path, "rb");
    REQUIRE(f != nullptr);
    char hdr[3] = {};
    REQUIRE(std::fread(hdr, 1, 2, f) == 2);
    std::fclose(f);
    CHECK(std::string(hdr) == "P6");
    std::remove(path);
    std::remove((std::string(path) + ".idx").c_str());
}
