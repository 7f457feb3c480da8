#pragma once
// Generation-side image codec: a lossless palette tokenizer (1 pixel = 1 token,
// raster order, codebook K=7) plus the three conditioning resize policies and
// the pixel<->trunk-patch index maps shared by the backbone and samplers.

#include <cstdint>
#include <string>
#include <vector>

#include "world/scene.hpp"

namespace reca {

// trunk patches are whole layout cells: 16 positions of 8x8 = 64 pixel slots
inline constexpr int kTrunkPatchPx = kCellPx;                       // 8
inline constexpr int kTrunkPatches = kGridCells * kGridCells;       // 16
inline constexpr int kSlotsPerPatch = kTrunkPatchPx * kTrunkPatchPx;  // 64
inline constexpr int kTokenCount = kImagePx * kImagePx;             // N = 1024
inline constexpr int kLatentDim = kSlotsPerPatch * 3;               // RGB per patch

// pixel raster index -> (trunk patch, slot within patch) and back
inline int pixel_patch(int pixel) {
    int r = pixel / kImagePx, c = pixel % kImagePx;
    return (r / kTrunkPatchPx) * kGridCells + (c / kTrunkPatchPx);
}
inline int pixel_slot(int pixel) {
    int r = pixel / kImagePx, c = pixel % kImagePx;
    return (r % kTrunkPatchPx) * kTrunkPatchPx + (c % kTrunkPatchPx);
}
inline int patch_slot_pixel(int patch, int slot) {
    int r = (patch / kGridCells) * kTrunkPatchPx + slot / kTrunkPatchPx;
    int c = (patch % kGridCells) * kTrunkPatchPx + slot % kTrunkPatchPx;
    return r * kImagePx + c;
}

// ----- lossless tokenizer -----------------------------------------------------

std::vector<int> tokenize_image(const PaletteImage& img);   // length N, raster
PaletteImage detokenize_image(const std::vector<int>& tokens);  // exact inverse

// ----- resize policies --------------------------------------------------------

enum class ResizeMode { min_resolution, full_resolution, blur8x };

struct ResizePolicy {
    ResizeMode mode = ResizeMode::min_resolution;
};

std::string resize_mode_name(ResizeMode m);
ResizeMode resize_mode_from_name(const std::string& s);

// square palette grid of arbitrary side (the 16x16 min-resolution view)
struct PaletteGrid {
    int side = 0;
    std::vector<uint8_t> idx;
    PaletteGrid() = default;
    explicit PaletteGrid(int s) : side(s), idx((size_t)s * s, 0) {}
    uint8_t at(int r, int c) const { return idx[(size_t)r * side + c]; }
    uint8_t& at(int r, int c) { return idx[(size_t)r * side + c]; }
};

// 2x2-block majority vote over palette indices, ties to the lower index
PaletteGrid min_resolution_view(const PaletteImage& img);   // 16x16

// average RGB over 8x8 blocks, then nearest-upsample back to 32x32
RgbImage blur8x(const RgbImage& img);

RgbImage grid_to_rgb(const PaletteGrid& g);

// the encoder-facing view: 16x16 RGB for min_resolution, 32x32 otherwise
RgbImage resize_for_encoder(const PaletteImage& img, ResizePolicy policy);

// ----- continuous latents for diffusion / flow --------------------------------
// per-patch RGB floats in [-1,1], shape (kTrunkPatches x kLatentDim) row-major

std::vector<double> image_to_latents(const PaletteImage& img);
RgbImage latents_to_image(const std::vector<double>& latents);  // clamps to [-1,1]

} // namespace reca
