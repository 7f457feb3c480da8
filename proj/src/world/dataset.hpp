#pragma once
// Corpus generation and on-disk formats: JSONL scene records, plain-text caption
// corpora, and PPM (P6) image dumps with a palette-index sidecar.

#include <cstdint>
#include <string>
#include <vector>

#include "world/caption.hpp"
#include "world/scene.hpp"

namespace reca {

// One corpus example: a scene, its rendered palette image, and one caption.
struct Example {
    Scene scene;
    PaletteImage image;
    Caption caption;
};

// Deterministically sample `count` examples from the named stream of `seed`.
std::vector<Example> make_examples(int count, const WorldConfig& wc, const CaptionConfig& cc,
                                   uint64_t seed, const std::string& stream);

// One record per line:
// {"objects":[{"shape":..,"color":..,"row":..,"col":..}],"caption_tokens":[..],
//  "sparsity":{"color":..,"position":..,"count":..},"template_id":..}
// Images are not stored; they are re-rendered from the scene on read.
void write_examples_jsonl(const std::string& path, const std::vector<Example>& examples);
std::vector<Example> read_examples_jsonl(const std::string& path);

// One detokenized caption per line (input corpus for the prompt-leakage audit).
void write_caption_corpus(const std::string& path, const std::vector<Example>& examples);

// Binary PPM (P6), 8-bit RGB from the palette map, plus "<path>.idx" sidecar
// holding the palette-index grid as text.
void write_ppm_with_sidecar(const std::string& path, const PaletteImage& img);
PaletteImage read_palette_sidecar(const std::string& sidecar_path);

} // namespace reca
