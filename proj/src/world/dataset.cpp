#include "world/dataset.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace reca {

using nlohmann::json;

std::vector<Example> make_examples(int count, const WorldConfig& wc, const CaptionConfig& cc,
                                   uint64_t seed, const std::string& stream) {
    if (count < 0) fail(Error::Kind::invalid_arg, "example count must be non-negative");
    Rng rng = rng_stream(seed, stream);
    std::vector<Example> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Example ex;
        ex.scene = sample_scene(rng, wc);
        ex.image = render_scene(ex.scene);
        ex.caption = make_caption(ex.scene, cc, rng);
        out.push_back(std::move(ex));
    }
    return out;
}

void write_examples_jsonl(const std::string& path, const std::vector<Example>& examples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Error::Kind::io, "cannot open '" + path + "' for writing");
    for (const Example& ex : examples) {
        json objs = json::array();
        for (const SceneObject& o : ex.scene.objects)
            objs.push_back({{"shape", o.shape}, {"color", o.color}, {"row", o.row}, {"col", o.col}});
        json rec = {
            {"objects", objs},
            {"caption_tokens", ex.caption.tokens},
            {"sparsity",
             {{"color", ex.caption.mentions_color},
              {"position", ex.caption.mentions_position},
              {"count", ex.caption.mentions_count}}},
            {"template_id", ex.caption.template_id},
        };
        f << rec.dump() << "\n";
    }
    if (!f) fail(Error::Kind::io, "write to '" + path + "' failed");
}

std::vector<Example> read_examples_jsonl(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(Error::Kind::io, "cannot open '" + path + "' for reading");
    std::vector<Example> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            fail(Error::Kind::io,
                 "'" + path + "' line " + std::to_string(lineno) + ": " + e.what());
        }
        Example ex;
        for (const json& jo : rec.at("objects")) {
            SceneObject o;
            o.shape = jo.at("shape").get<int>();
            o.color = jo.at("color").get<int>();
            o.row = jo.at("row").get<int>();
            o.col = jo.at("col").get<int>();
            ex.scene.objects.push_back(o);
        }
        ex.image = render_scene(ex.scene); // also validates object fields
        ex.caption.tokens = rec.at("caption_tokens").get<std::vector<int>>();
        const json& sp = rec.at("sparsity");
        ex.caption.mentions_color = sp.at("color").get<bool>();
        ex.caption.mentions_position = sp.at("position").get<bool>();
        ex.caption.mentions_count = sp.at("count").get<bool>();
        ex.caption.template_id = rec.at("template_id").get<int>();
        out.push_back(std::move(ex));
    }
    return out;
}

void write_caption_corpus(const std::string& path, const std::vector<Example>& examples) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Error::Kind::io, "cannot open '" + path + "' for writing");
    for (const Example& ex : examples) f << vocab().text(ex.caption.tokens) << "\n";
    if (!f) fail(Error::Kind::io, "write to '" + path + "' failed");
}

void write_ppm_with_sidecar(const std::string& path, const PaletteImage& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(Error::Kind::io, "cannot open '" + path + "' for writing");
    f << "P6\n" << kImagePx << " " << kImagePx << "\n255\n";
    for (int i = 0; i < kImagePx * kImagePx; ++i) {
        const auto& rgb = palette_rgb(img.idx[i]);
        for (int c = 0; c < 3; ++c)
            f.put((char)(uint8_t)std::lround(rgb[c] * 255.0));
    }
    if (!f) fail(Error::Kind::io, "write to '" + path + "' failed");

    std::ofstream s(path + ".idx", std::ios::binary);
    if (!s) fail(Error::Kind::io, "cannot open '" + path + ".idx' for writing");
    for (int r = 0; r < kImagePx; ++r) {
        for (int c = 0; c < kImagePx; ++c) {
            if (c) s << " ";
            s << (int)img.at(r, c);
        }
        s << "\n";
    }
    if (!s) fail(Error::Kind::io, "write to '" + path + ".idx' failed");
}

PaletteImage read_palette_sidecar(const std::string& sidecar_path) {
    std::ifstream s(sidecar_path, std::ios::binary);
    if (!s) fail(Error::Kind::io, "cannot open '" + sidecar_path + "' for reading");
    PaletteImage img{};
    for (int i = 0; i < kImagePx * kImagePx; ++i) {
        int v = -1;
        if (!(s >> v) || v < 0 || v >= kPaletteSize)
            fail(Error::Kind::io, "'" + sidecar_path + "' is not a valid palette-index grid");
        img.idx[i] = (uint8_t)v;
    }
    return img;
}

} // namespace reca
