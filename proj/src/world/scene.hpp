#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace reca {

// ----- the scene world --------------------------------------------------------
//
// A scene is up to four colored shapes on a 4x4 cell grid.  Rendering is a
// fixed function onto a 32x32 palette image: each occupied cell gets an 8x8
// glyph that never touches the cell border, so decoding is exact per-cell
// pattern matching and every rendered image decodes back to its scene.
//
// Glyphs are additionally chosen so that 2x majority-vote downsampling (the
// 16x16 minimum-resolution path) maps each (shape, color) to a distinct cell
// pattern: shape identity survives the downsample even though pixel detail
// does not.

inline constexpr int kGridCells = 4;
inline constexpr int kCellPx = 8;
inline constexpr int kImagePx = kGridCells * kCellPx;  // 32
inline constexpr int kNumShapes = 4;
inline constexpr int kNumColors = 6;
inline constexpr int kPaletteSize = 1 + kNumColors;    // background + colors
inline constexpr int kMaxObjects = 4;

// shape ids
enum : int { kShapeSquare = 0, kShapeCircle = 1, kShapeTriangle = 2, kShapeCross = 3 };
// color ids (palette index = color + 1; palette 0 is the white background)
enum : int { kRed = 0, kGreen = 1, kBlue = 2, kYellow = 3, kPurple = 4, kOrange = 5 };

struct SceneObject {
    int shape = 0;
    int color = 0;
    int row = 0;
    int col = 0;
};

struct Scene {
    // kept sorted by (row, col); at most one object per cell
    std::vector<SceneObject> objects;

    const SceneObject* at(int row, int col) const;
    std::string key() const;      // canonical text form, stable across runs
    uint64_t hash() const;        // fnv1a64 of key()
    bool operator==(const Scene& o) const { return key() == o.key(); }
};

// palette-indexed image, row-major
struct PaletteImage {
    std::array<uint8_t, kImagePx * kImagePx> idx{};
    uint8_t at(int r, int c) const { return idx[r * kImagePx + c]; }
    uint8_t& at(int r, int c) { return idx[r * kImagePx + c]; }
};

// RGB image with components in [0,1], row-major, 3 channels interleaved
struct RgbImage {
    int h = 0, w = 0;
    std::vector<double> v;  // h*w*3
    RgbImage() = default;
    RgbImage(int hh, int ww) : h(hh), w(ww), v((size_t)hh * ww * 3, 0.0) {}
    double* px(int r, int c) { return v.data() + ((size_t)r * w + c) * 3; }
    const double* px(int r, int c) const { return v.data() + ((size_t)r * w + c) * 3; }
};

// palette RGB values; index 0 is the white background
const std::array<double, 3>& palette_rgb(int palette_index);

// 8x8 ink mask of a glyph (1 = object color, 0 = background)
const std::array<uint8_t, kCellPx * kCellPx>& glyph_mask(int shape);

// scene sampling distribution; uniform by default, with an optional per-shape
// color skew used by bias experiments (probability `color_bias_p` of forcing
// `color_bias_color` when drawing `color_bias_shape`)
struct WorldConfig {
    int min_objects = 1;
    int max_objects = kMaxObjects;
    int color_bias_shape = -1;
    int color_bias_color = 0;
    double color_bias_p = 0.0;
};

Scene sample_scene(Rng& rng, const WorldConfig& cfg = {});

PaletteImage render_scene(const Scene& scene);

// exact decoding; `ok == false` lists every cell that is not an exact glyph
struct DecodeResult {
    bool ok = false;
    Scene scene;
    std::vector<int> bad_cells;  // cell index row*4+col
};
DecodeResult try_decode(const PaletteImage& img);
Scene decode_image(const PaletteImage& img);  // throws Error(undecodable) with cell list

RgbImage to_rgb(const PaletteImage& img);
// nearest palette color by squared distance, ties to the lower index
PaletteImage quantize_to_palette(const RgbImage& img);

std::string shape_name(int shape);
std::string color_name(int color);

} // namespace reca
