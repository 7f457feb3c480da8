#include "eval/geneval.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"

namespace reca {

const char* subtask_name(Subtask s) {
    switch (s) {
        case Subtask::single_object: return "single_object";
        case Subtask::two_object: return "two_object";
        case Subtask::counting: return "counting";
        case Subtask::colors: return "colors";
        case Subtask::position: return "position";
        case Subtask::color_attri: return "color_attri";
    }
    fail(Error::Kind::invalid_arg, "unknown subtask value");
}

namespace {

std::vector<int> with_period(std::vector<int> toks) {
    toks.push_back(vocab().id("."));
    return toks;
}

std::vector<int> relation_words(int relation) {
    switch (relation) {
        case kRelLeft: return {vocab().id("left"), vocab().id("of")};
        case kRelRight: return {vocab().id("right"), vocab().id("of")};
        case kRelAbove: return {vocab().id("above")};
        case kRelBelow: return {vocab().id("below")};
    }
    fail(Error::Kind::invalid_arg, "unknown relation: " + std::to_string(relation));
}

GenevalPrompt instantiate(Subtask st, Rng& rng) {
    const Vocab& v = vocab();
    const int a = v.id("a"), photo = v.id("photo"), of = v.id("of"), and_w = v.id("and");
    GenevalPrompt p;
    p.subtask = st;
    switch (st) {
        case Subtask::single_object: {
            p.shape_a = static_cast<int>(rng.below(kNumShapes));
            p.tokens = with_period({a, photo, of, a, shape_word(p.shape_a)});
            break;
        }
        case Subtask::two_object: {
            p.shape_a = static_cast<int>(rng.below(kNumShapes));
            do p.shape_b = static_cast<int>(rng.below(kNumShapes));
            while (p.shape_b == p.shape_a);
            p.tokens = with_period({a, photo, of, a, shape_word(p.shape_a), and_w, a, shape_word(p.shape_b)});
            break;
        }
        case Subtask::counting: {
            p.shape_a = static_cast<int>(rng.below(kNumShapes));
            p.count = 2 + static_cast<int>(rng.below(3));  // two..four
            p.tokens = with_period({a, photo, of, count_word(p.count), shape_word_plural(p.shape_a)});
            break;
        }
        case Subtask::colors: {
            p.shape_a = static_cast<int>(rng.below(kNumShapes));
            p.color_a = static_cast<int>(rng.below(kNumColors));
            p.tokens = with_period({a, photo, of, a, color_word(p.color_a), shape_word(p.shape_a)});
            break;
        }
        case Subtask::position: {
            p.shape_a = static_cast<int>(rng.below(kNumShapes));
            do p.shape_b = static_cast<int>(rng.below(kNumShapes));
            while (p.shape_b == p.shape_a);
            p.relation = static_cast<int>(rng.below(4));
            std::vector<int> toks{a, photo, of, a, shape_word(p.shape_a)};
            for (int w : relation_words(p.relation)) toks.push_back(w);
            toks.push_back(a);
            toks.push_back(shape_word(p.shape_b));
            p.tokens = with_period(std::move(toks));
            break;
        }
        case Subtask::color_attri: {
            p.shape_a = static_cast<int>(rng.below(kNumShapes));
            do p.shape_b = static_cast<int>(rng.below(kNumShapes));
            while (p.shape_b == p.shape_a);
            p.color_a = static_cast<int>(rng.below(kNumColors));
            p.color_b = static_cast<int>(rng.below(kNumColors));
            p.tokens = with_period({a, photo, of, a, color_word(p.color_a), shape_word(p.shape_a), and_w,
                                    a, color_word(p.color_b), shape_word(p.shape_b)});
            break;
        }
    }
    return p;
}

} // namespace

std::vector<std::string> GenevalSuite::prompt_strings() const {
    std::vector<std::string> out;
    out.reserve(prompts.size());
    for (const GenevalPrompt& p : prompts) out.push_back(vocab().text(p.tokens));
    return out;
}

GenevalSuite make_geneval_suite(int per_subtask, uint64_t seed) {
    if (per_subtask < 1)
        fail(Error::Kind::invalid_arg, "per_subtask must be >= 1, got " + std::to_string(per_subtask));
    GenevalSuite suite;
    suite.per_subtask = per_subtask;
    Rng rng = rng_stream(seed, "eval/suite");
    for (int s = 0; s < kSubtaskCount; ++s) {
        std::set<std::vector<int>> seen;
        int made = 0, stale = 0;
        while (made < per_subtask) {
            GenevalPrompt p = instantiate(static_cast<Subtask>(s), rng);
            // prefer distinct prompts; duplicates only once a template space
            // (e.g. four single-object prompts) is exhausted
            if (seen.insert(p.tokens).second || ++stale > 64) {
                suite.prompts.push_back(std::move(p));
                ++made;
                stale = 0;
            }
        }
    }
    return suite;
}

bool scene_satisfies(const GenevalPrompt& p, const Scene& s) {
    auto has = [&](int shape, int color) {
        for (const SceneObject& o : s.objects)
            if (o.shape == shape && (color < 0 || o.color == color)) return true;
        return false;
    };
    switch (p.subtask) {
        case Subtask::single_object: return has(p.shape_a, -1);
        case Subtask::two_object: return has(p.shape_a, -1) && has(p.shape_b, -1);
        case Subtask::counting: {
            int n = 0;
            for (const SceneObject& o : s.objects) n += (o.shape == p.shape_a);
            return n == p.count;
        }
        case Subtask::colors: return has(p.shape_a, p.color_a);
        case Subtask::position: {
            for (const SceneObject& oa : s.objects) {
                if (oa.shape != p.shape_a) continue;
                for (const SceneObject& ob : s.objects) {
                    if (ob.shape != p.shape_b) continue;
                    const bool ok = (p.relation == kRelLeft && oa.col < ob.col) ||
                                    (p.relation == kRelRight && oa.col > ob.col) ||
                                    (p.relation == kRelAbove && oa.row < ob.row) ||
                                    (p.relation == kRelBelow && oa.row > ob.row);
                    if (ok) return true;
                }
            }
            return false;
        }
        case Subtask::color_attri: return has(p.shape_a, p.color_a) && has(p.shape_b, p.color_b);
    }
    return false;
}

bool score(const GenevalPrompt& p, const PaletteImage& image) {
    DecodeResult d = try_decode(image);
    return d.ok && scene_satisfies(p, d.scene);
}

bool score(const GenevalPrompt& p, const RgbImage& image) {
    return score(p, quantize_to_palette(image));
}

bool leakage_audit(const GenevalSuite& suite, const std::vector<std::string>& caption_lines,
                   std::vector<std::string>* offending) {
    bool clean = true;
    for (const std::string& prompt : suite.prompt_strings()) {
        for (const std::string& line : caption_lines) {
            if (line.find(prompt) == std::string::npos) continue;
            clean = false;
            if (offending != nullptr) offending->push_back(prompt);
            break;
        }
    }
    return clean;
}

// ----- reports ----------------------------------------------------------------

EvalReport run_geneval(Model& m, const GenevalSuite& suite, const SamplerSettings& ss,
                       int samples_per_prompt, uint64_t seed) {
    if (samples_per_prompt < 1)
        fail(Error::Kind::invalid_arg, "samples_per_prompt must be >= 1");
    EvalReport r;
    r.per_subtask = suite.per_subtask;
    r.samples_per_prompt = samples_per_prompt;
    r.seed = seed;
    int pass[kSubtaskCount] = {0}, total[kSubtaskCount] = {0};
    for (size_t i = 0; i < suite.prompts.size(); ++i) {
        const GenevalPrompt& p = suite.prompts[i];
        for (int s = 0; s < samples_per_prompt; ++s) {
            Rng rng = rng_stream(seed, "eval/geneval", i * 997 + static_cast<uint64_t>(s));
            PaletteImage img = sample_t2i(m, p.tokens, ss, rng);
            pass[static_cast<int>(p.subtask)] += score(p, img) ? 1 : 0;
            total[static_cast<int>(p.subtask)] += 1;
        }
    }
    double sum = 0;
    for (int s = 0; s < kSubtaskCount; ++s) {
        r.subtask[s] = (total[s] > 0) ? double(pass[s]) / total[s] : 0.0;
        sum += r.subtask[s];
    }
    r.overall = sum / kSubtaskCount;
    return r;
}

std::string report_json(const EvalReport& r) {
    nlohmann::json j;
    j["step"] = r.step;
    j["seed"] = r.seed;
    j["config_digest"] = r.config_digest;
    j["per_subtask"] = r.per_subtask;
    j["samples_per_prompt"] = r.samples_per_prompt;
    for (int s = 0; s < kSubtaskCount; ++s)
        j["subtasks"][subtask_name(static_cast<Subtask>(s))] = r.subtask[s];
    j["overall"] = r.overall;
    return j.dump(2);
}

std::string report_csv_header() {
    return "step,seed,config_digest,single_object,two_object,counting,colors,position,"
           "color_attri,overall";
}

std::string report_csv_row(const EvalReport& r) {
    std::ostringstream os;
    os << r.step << ',' << r.seed << ',' << r.config_digest;
    os.setf(std::ios::fixed);
    os.precision(6);
    for (int s = 0; s < kSubtaskCount; ++s) os << ',' << r.subtask[s];
    os << ',' << r.overall;
    return os.str();
}

// ----- reconstruction fidelity ------------------------------------------------

namespace {

struct CellRead {
    bool decodable = false;
    bool occupied = false;
    int shape = -1;
    int color = -1;
};

CellRead read_cell(const PaletteImage& img, int cell_r, int cell_c) {
    CellRead out;
    const int r0 = cell_r * kCellPx, c0 = cell_c * kCellPx;
    int ink = 0;
    for (int r = 0; r < kCellPx; ++r)
        for (int c = 0; c < kCellPx; ++c) {
            const uint8_t v = img.at(r0 + r, c0 + c);
            if (v == 0) continue;
            if (ink != 0 && v != ink) return out;  // two ink colors: not a glyph
            ink = v;
        }
    if (ink == 0) {
        out.decodable = true;
        return out;  // clean background cell
    }
    for (int shape = 0; shape < kNumShapes; ++shape) {
        const auto& mask = glyph_mask(shape);
        bool match = true;
        for (int i = 0; i < kCellPx * kCellPx && match; ++i) {
            const uint8_t v = img.idx[(r0 + i / kCellPx) * kImagePx + (c0 + i % kCellPx)];
            match = mask[i] ? (v == ink) : (v == 0);
        }
        if (match) {
            out.decodable = true;
            out.occupied = true;
            out.shape = shape;
            out.color = ink - 1;
            return out;
        }
    }
    return out;
}

} // namespace

ReconMetrics recon_fidelity(const Scene& source, const PaletteImage& generated) {
    ReconMetrics m;
    int cells_ok = 0, occ = 0, shape_ok = 0, color_ok = 0;
    for (int r = 0; r < kGridCells; ++r)
        for (int c = 0; c < kGridCells; ++c) {
            const SceneObject* src = source.at(r, c);
            const CellRead got = read_cell(generated, r, c);
            if (src == nullptr) {
                cells_ok += (got.decodable && !got.occupied) ? 1 : 0;
                continue;
            }
            ++occ;
            const bool here = got.decodable && got.occupied;
            shape_ok += (here && got.shape == src->shape) ? 1 : 0;
            color_ok += (here && got.color == src->color) ? 1 : 0;
            cells_ok += (here && got.shape == src->shape && got.color == src->color) ? 1 : 0;
        }
    const int cells = kGridCells * kGridCells;
    m.cell_accuracy = double(cells_ok) / cells;
    m.shape_accuracy = (occ > 0) ? double(shape_ok) / occ : 1.0;
    m.color_accuracy = (occ > 0) ? double(color_ok) / occ : 1.0;
    m.exact_match = (cells_ok == cells) ? 1.0 : 0.0;
    return m;
}

ReconMetrics recon_probe(Model& m, const UnderstandingEncoder& enc, const TemplateBank& bank,
                         const RecaCondition& cond, const std::vector<Example>& probe,
                         const SamplerSettings& ss, uint64_t seed) {
    if (probe.empty()) fail(Error::Kind::invalid_arg, "recon_probe: empty probe set");
    ReconMetrics acc;
    for (size_t i = 0; i < probe.size(); ++i) {
        Rng rng = rng_stream(seed, "eval/recon", i);
        PaletteImage img = reconstruct(m, enc, probe[i].image,
                                       bank.tokens(static_cast<int>(i) % bank.size()), cond, ss, rng);
        ReconMetrics one = recon_fidelity(probe[i].scene, img);
        acc.cell_accuracy += one.cell_accuracy;
        acc.shape_accuracy += one.shape_accuracy;
        acc.color_accuracy += one.color_accuracy;
        acc.exact_match += one.exact_match;
    }
    const double n = static_cast<double>(probe.size());
    acc.cell_accuracy /= n;
    acc.shape_accuracy /= n;
    acc.color_accuracy /= n;
    acc.exact_match /= n;
    return acc;
}

// ----- understanding accuracy -------------------------------------------------

double i2t_accuracy(Model& m, const UnderstandingEncoder& enc, const std::vector<Example>& held,
                    uint64_t seed) {
    int asked = 0, correct = 0;
    for (size_t i = 0; i < held.size(); ++i) {
        Rng rng = rng_stream(seed, "eval/i2t", i);
        auto qa = make_vqa(held[i].scene, rng);
        if (!qa) continue;
        ++asked;
        std::vector<double> logits = forward_i2t(m, i2t_prefix(enc, qa->question, held[i].image));
        const int pred = argmax_lowest(logits.data(), static_cast<int>(logits.size()));
        correct += (pred == qa->answer) ? 1 : 0;
    }
    return (asked > 0) ? double(correct) / asked : 0.0;
}

} // namespace reca
