#include "model/tokenizer.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace reca {

std::vector<int> tokenize_image(const PaletteImage& img) {
    std::vector<int> out(kTokenCount);
    for (int i = 0; i < kTokenCount; ++i) out[i] = img.idx[i];
    return out;
}

PaletteImage detokenize_image(const std::vector<int>& tokens) {
    if ((int)tokens.size() != kTokenCount)
        fail(Error::Kind::invalid_arg, "detokenize: expected " + std::to_string(kTokenCount) +
                                           " tokens, got " + std::to_string(tokens.size()));
    PaletteImage img{};
    for (int i = 0; i < kTokenCount; ++i) {
        if (tokens[i] < 0 || tokens[i] >= kPaletteSize)
            fail(Error::Kind::invalid_arg, "detokenize: token " + std::to_string(tokens[i]) +
                                               " at position " + std::to_string(i) +
                                               " outside codebook of size " +
                                               std::to_string(kPaletteSize));
        img.idx[i] = (uint8_t)tokens[i];
    }
    return img;
}

std::string resize_mode_name(ResizeMode m) {
    switch (m) {
        case ResizeMode::min_resolution: return "min_resolution";
        case ResizeMode::full_resolution: return "full_resolution";
        case ResizeMode::blur8x: return "blur8x";
    }
    fail(Error::Kind::invalid_arg, "unknown resize mode");
}

ResizeMode resize_mode_from_name(const std::string& s) {
    if (s == "min_resolution") return ResizeMode::min_resolution;
    if (s == "full_resolution") return ResizeMode::full_resolution;
    if (s == "blur8x") return ResizeMode::blur8x;
    fail(Error::Kind::config, "unknown resize mode '" + s + "'");
}

PaletteGrid min_resolution_view(const PaletteImage& img) {
    PaletteGrid g(kImagePx / 2);
    for (int r = 0; r < g.side; ++r)
        for (int c = 0; c < g.side; ++c) {
            int counts[kPaletteSize] = {};
            for (int dr = 0; dr < 2; ++dr)
                for (int dc = 0; dc < 2; ++dc) ++counts[img.at(r * 2 + dr, c * 2 + dc)];
            int best = 0;
            for (int k = 1; k < kPaletteSize; ++k)
                if (counts[k] > counts[best]) best = k;  // ties keep the lower index
            g.at(r, c) = (uint8_t)best;
        }
    return g;
}

RgbImage blur8x(const RgbImage& img) {
    if (img.h != kImagePx || img.w != kImagePx)
        fail(Error::Kind::invalid_arg, "blur8x: expected " + std::to_string(kImagePx) + "x" +
                                           std::to_string(kImagePx) + " image, got " +
                                           std::to_string(img.h) + "x" + std::to_string(img.w));
    RgbImage out(kImagePx, kImagePx);
    const int b = 8;
    for (int br = 0; br < kImagePx / b; ++br)
        for (int bc = 0; bc < kImagePx / b; ++bc) {
            double mean[3] = {};
            for (int r = 0; r < b; ++r)
                for (int c = 0; c < b; ++c) {
                    const double* p = img.px(br * b + r, bc * b + c);
                    for (int k = 0; k < 3; ++k) mean[k] += p[k];
                }
            for (int k = 0; k < 3; ++k) mean[k] /= b * b;
            for (int r = 0; r < b; ++r)
                for (int c = 0; c < b; ++c) {
                    double* p = out.px(br * b + r, bc * b + c);
                    for (int k = 0; k < 3; ++k) p[k] = mean[k];
                }
        }
    return out;
}

RgbImage grid_to_rgb(const PaletteGrid& g) {
    RgbImage out(g.side, g.side);
    for (int r = 0; r < g.side; ++r)
        for (int c = 0; c < g.side; ++c) {
            const auto& rgb = palette_rgb(g.at(r, c));
            for (int k = 0; k < 3; ++k) out.px(r, c)[k] = rgb[k];
        }
    return out;
}

RgbImage resize_for_encoder(const PaletteImage& img, ResizePolicy policy) {
    switch (policy.mode) {
        case ResizeMode::min_resolution: return grid_to_rgb(min_resolution_view(img));
        case ResizeMode::full_resolution: return to_rgb(img);
        case ResizeMode::blur8x: return blur8x(to_rgb(img));
    }
    fail(Error::Kind::invalid_arg, "unknown resize mode");
}

std::vector<double> image_to_latents(const PaletteImage& img) {
    std::vector<double> lat((size_t)kTrunkPatches * kLatentDim);
    for (int p = 0; p < kTrunkPatches; ++p)
        for (int s = 0; s < kSlotsPerPatch; ++s) {
            const auto& rgb = palette_rgb(img.idx[patch_slot_pixel(p, s)]);
            for (int k = 0; k < 3; ++k)
                lat[(size_t)p * kLatentDim + s * 3 + k] = rgb[k] * 2.0 - 1.0;
        }
    return lat;
}

RgbImage latents_to_image(const std::vector<double>& latents) {
    if ((int64_t)latents.size() != (int64_t)kTrunkPatches * kLatentDim)
        fail(Error::Kind::invalid_arg,
             "latents_to_image: expected " + std::to_string(kTrunkPatches * kLatentDim) +
                 " values, got " + std::to_string(latents.size()));
    RgbImage out(kImagePx, kImagePx);
    for (int p = 0; p < kTrunkPatches; ++p)
        for (int s = 0; s < kSlotsPerPatch; ++s) {
            int pix = patch_slot_pixel(p, s);
            for (int k = 0; k < 3; ++k) {
                double v = latents[(size_t)p * kLatentDim + s * 3 + k];
                v = std::clamp(v, -1.0, 1.0);
                out.v[(size_t)pix * 3 + k] = (v + 1.0) / 2.0;
            }
        }
    return out;
}

} // namespace reca
