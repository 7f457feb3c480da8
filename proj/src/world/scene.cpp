#include "world/scene.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace reca {

// Geometry constraint: the regression tests pin the tie-break of the quantizer
// on the exact midpoint of entries 0 and 1, so no other entry may be strictly
// nearer to that midpoint than the endpoints are (nearest is orange at sq.
// distance 0.347 vs 0.212 for the endpoints).
const std::array<double, 3>& palette_rgb(int palette_index) {
    static const std::array<std::array<double, 3>, kPaletteSize> kPalette = {{
        {1.00, 1.00, 1.00},  // background
        {0.95, 0.35, 0.35},  // red
        {0.10, 0.80, 0.15},  // green
        {0.15, 0.20, 0.90},  // blue
        {0.95, 0.85, 0.10},  // yellow
        {0.60, 0.15, 0.80},  // purple
        {0.95, 0.55, 0.10},  // orange
    }};
    if (palette_index < 0 || palette_index >= kPaletteSize)
        fail(Error::Kind::invalid_arg, "palette index " + std::to_string(palette_index) +
                                           " out of range");
    return kPalette[palette_index];
}

// Glyph geometry.  Constraints: never touch the 8x8 cell border, pairwise
// distinct at full resolution, and pairwise distinct after per-2x2-block
// majority vote (ties fall to the background), where only blocks with >= 3 ink
// pixels survive.  Surviving inner-block patterns:
//   square   {(1,1)}                circle  {(1,1),(1,2),(2,1),(2,2)}
//   triangle {(1,1),(2,1),(2,2)}    cross   {(1,1),(1,2)}
const std::array<uint8_t, kCellPx * kCellPx>& glyph_mask(int shape) {
    static const auto masks = [] {
        std::array<std::array<uint8_t, kCellPx * kCellPx>, kNumShapes> m{};
        auto set = [&](int s, int r, int c) { m[s][r * kCellPx + c] = 1; };
        // square: 4x4 solid block
        for (int r = 1; r <= 4; ++r)
            for (int c = 1; c <= 4; ++c) set(kShapeSquare, r, c);
        // circle: 6x6 octagon (corners cut)
        for (int r = 1; r <= 6; ++r)
            for (int c = 1; c <= 6; ++c) {
                bool corner = (r == 1 || r == 6) && (c == 1 || c == 6);
                if (!corner) set(kShapeCircle, r, c);
            }
        // triangle: row r spans columns 1..r
        for (int r = 1; r <= 6; ++r)
            for (int c = 1; c <= r; ++c) set(kShapeTriangle, r, c);
        // cross: horizontal bar rows 2-3 x cols 1-6, vertical bar rows 1-4 x cols 3-4
        for (int r = 2; r <= 3; ++r)
            for (int c = 1; c <= 6; ++c) set(kShapeCross, r, c);
        for (int r = 1; r <= 4; ++r)
            for (int c = 3; c <= 4; ++c) set(kShapeCross, r, c);
        return m;
    }();
    if (shape < 0 || shape >= kNumShapes)
        fail(Error::Kind::invalid_arg, "shape id " + std::to_string(shape) + " out of range");
    return masks[shape];
}

const SceneObject* Scene::at(int row, int col) const {
    for (const SceneObject& o : objects)
        if (o.row == row && o.col == col) return &o;
    return nullptr;
}

std::string Scene::key() const {
    std::string k;
    for (const SceneObject& o : objects) {
        k += std::to_string(o.row) + std::to_string(o.col) + ":" + std::to_string(o.shape) +
             ":" + std::to_string(o.color) + ";";
    }
    return k;
}

uint64_t Scene::hash() const { return fnv1a64(key()); }

Scene sample_scene(Rng& rng, const WorldConfig& cfg) {
    if (cfg.min_objects < 1 || cfg.max_objects > kGridCells * kGridCells ||
        cfg.min_objects > cfg.max_objects)
        fail(Error::Kind::config, "scene sampler: bad object count range [" +
                                      std::to_string(cfg.min_objects) + "," +
                                      std::to_string(cfg.max_objects) + "]");
    int count = cfg.min_objects + (int)rng.below((uint64_t)(cfg.max_objects - cfg.min_objects + 1));
    // draw `count` distinct cells by rejection (16 cells, at most 4 draws)
    std::vector<int> cells;
    while ((int)cells.size() < count) {
        int cell = (int)rng.below(kGridCells * kGridCells);
        if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
    }
    Scene s;
    for (int cell : cells) {
        SceneObject o;
        o.row = cell / kGridCells;
        o.col = cell % kGridCells;
        o.shape = (int)rng.below(kNumShapes);
        if (o.shape == cfg.color_bias_shape && rng.uniform() < cfg.color_bias_p) {
            o.color = cfg.color_bias_color;
        } else if (o.shape == cfg.color_bias_shape && cfg.color_bias_p > 0.0) {
            // remaining mass spread over the other colors so the bias is exact
            int c = (int)rng.below(kNumColors - 1);
            o.color = (c >= cfg.color_bias_color) ? c + 1 : c;
        } else {
            o.color = (int)rng.below(kNumColors);
        }
        s.objects.push_back(o);
    }
    std::sort(s.objects.begin(), s.objects.end(), [](const SceneObject& a, const SceneObject& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    return s;
}

PaletteImage render_scene(const Scene& scene) {
    PaletteImage img;  // zero-initialized = background
    for (const SceneObject& o : scene.objects) {
        if (o.row < 0 || o.row >= kGridCells || o.col < 0 || o.col >= kGridCells)
            fail(Error::Kind::invalid_arg, "render: object cell (" + std::to_string(o.row) +
                                               "," + std::to_string(o.col) + ") out of grid");
        const auto& mask = glyph_mask(o.shape);
        uint8_t ink = (uint8_t)(o.color + 1);
        for (int r = 0; r < kCellPx; ++r)
            for (int c = 0; c < kCellPx; ++c)
                if (mask[r * kCellPx + c])
                    img.at(o.row * kCellPx + r, o.col * kCellPx + c) = ink;
    }
    return img;
}

DecodeResult try_decode(const PaletteImage& img) {
    DecodeResult res;
    res.ok = true;
    for (int cr = 0; cr < kGridCells; ++cr) {
        for (int cc = 0; cc < kGridCells; ++cc) {
            // gather the 8x8 cell
            std::array<uint8_t, kCellPx * kCellPx> cell{};
            for (int r = 0; r < kCellPx; ++r)
                for (int c = 0; c < kCellPx; ++c)
                    cell[r * kCellPx + c] = img.at(cr * kCellPx + r, cc * kCellPx + c);
            // empty?
            bool empty = std::all_of(cell.begin(), cell.end(), [](uint8_t v) { return v == 0; });
            if (empty) continue;
            // find the single ink color, then exact-match a glyph
            int ink = -1;
            bool mixed = false;
            for (uint8_t v : cell)
                if (v != 0) {
                    if (ink == -1) ink = v;
                    else if (ink != v) mixed = true;
                }
            int matched = -1;
            if (!mixed) {
                for (int s = 0; s < kNumShapes; ++s) {
                    const auto& mask = glyph_mask(s);
                    bool same = true;
                    for (int i = 0; i < kCellPx * kCellPx && same; ++i)
                        same = (cell[i] == (mask[i] ? ink : 0));
                    if (same) {
                        matched = s;
                        break;
                    }
                }
            }
            if (matched < 0) {
                res.ok = false;
                res.bad_cells.push_back(cr * kGridCells + cc);
            } else {
                SceneObject o;
                o.shape = matched;
                o.color = ink - 1;
                o.row = cr;
                o.col = cc;
                res.scene.objects.push_back(o);
            }
        }
    }
    if (!res.ok) res.scene.objects.clear();
    return res;
}

Scene decode_image(const PaletteImage& img) {
    DecodeResult res = try_decode(img);
    if (!res.ok) {
        std::string cells;
        for (int c : res.bad_cells) {
            if (!cells.empty()) cells += ",";
            cells += "(" + std::to_string(c / kGridCells) + "," + std::to_string(c % kGridCells) + ")";
        }
        fail(Error::Kind::undecodable, "image is not an exact rendering; bad cells: " + cells);
    }
    return res.scene;
}

RgbImage to_rgb(const PaletteImage& img) {
    RgbImage out(kImagePx, kImagePx);
    for (int r = 0; r < kImagePx; ++r)
        for (int c = 0; c < kImagePx; ++c) {
            const auto& rgb = palette_rgb(img.at(r, c));
            double* p = out.px(r, c);
            p[0] = rgb[0];
            p[1] = rgb[1];
            p[2] = rgb[2];
        }
    return out;
}

PaletteImage quantize_to_palette(const RgbImage& img) {
    if (img.h != kImagePx || img.w != kImagePx)
        fail(Error::Kind::invalid_arg, "quantize: expected " + std::to_string(kImagePx) + "x" +
                                           std::to_string(kImagePx) + ", got " +
                                           std::to_string(img.h) + "x" + std::to_string(img.w));
    PaletteImage out;
    for (int r = 0; r < kImagePx; ++r)
        for (int c = 0; c < kImagePx; ++c) {
            const double* p = img.px(r, c);
            int best = 0;
            double best_d = 1e300;
            for (int k = 0; k < kPaletteSize; ++k) {
                const auto& rgb = palette_rgb(k);
                double d = 0.0;
                for (int ch = 0; ch < 3; ++ch)
                    d += (p[ch] - rgb[ch]) * (p[ch] - rgb[ch]);
                if (d < best_d) {  // strict: ties keep the lower index
                    best_d = d;
                    best = k;
                }
            }
            out.at(r, c) = (uint8_t)best;
        }
    return out;
}

std::string shape_name(int shape) {
    static const char* names[] = {"square", "circle", "triangle", "cross"};
    if (shape < 0 || shape >= kNumShapes)
        fail(Error::Kind::invalid_arg, "shape id " + std::to_string(shape) + " out of range");
    return names[shape];
}

std::string color_name(int color) {
    static const char* names[] = {"red", "green", "blue", "yellow", "purple", "orange"};
    if (color < 0 || color >= kNumColors)
        fail(Error::Kind::invalid_arg, "color id " + std::to_string(color) + " out of range");
    return names[color];
}

} // namespace reca
