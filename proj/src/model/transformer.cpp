#include "model/transformer.hpp"

#include <cmath>

#include "core/error.hpp"

namespace reca {

Tape::Id Binder::operator()(const std::string& name) {
    auto it = cache.find(name);
    if (it != cache.end()) return it->second;
    Param& p = ps.at(name);
    bool rg = trainable && p.trainable;
    Tape::Id id = tape.leaf(p.w.data(), p.shape, rg, rg ? p.g.data() : nullptr);
    cache.emplace(name, id);
    return id;
}

void init_transformer_params(ParamStore& ps, const std::string& prefix,
                             const TransformerConfig& cfg, uint64_t seed) {
    if (cfg.d_model % cfg.heads != 0)
        fail(Error::Kind::config, "d_model " + std::to_string(cfg.d_model) +
                                      " not divisible by heads " + std::to_string(cfg.heads));
    const int d = cfg.d_model, dm = cfg.d_model * cfg.mlp_mult;
    auto ones = [&](const std::string& name, Shape shape) {
        Param& p = ps.add_zeros(name, std::move(shape));
        std::fill(p.w.begin(), p.w.end(), 1.0);
    };
    for (int l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + "l" + std::to_string(l) + "/";
        ones(lp + "ln1/g", {d});
        ps.add_zeros(lp + "ln1/b", {d});
        for (const char* w : {"wq", "wk", "wv", "wo"})
            ps.add_gaussian(lp + "attn/" + w, {d, d}, 0.02, seed);
        for (const char* b : {"bq", "bk", "bv", "bo"}) ps.add_zeros(lp + "attn/" + b, {d});
        ones(lp + "ln2/g", {d});
        ps.add_zeros(lp + "ln2/b", {d});
        ps.add_gaussian(lp + "mlp/w1", {d, dm}, 0.02, seed);
        ps.add_zeros(lp + "mlp/b1", {dm});
        ps.add_gaussian(lp + "mlp/w2", {dm, d}, 0.02, seed);
        ps.add_zeros(lp + "mlp/b2", {d});
    }
    ones(prefix + "lnf/g", {d});
    ps.add_zeros(prefix + "lnf/b", {d});
}

Tape::Id transformer_forward(Tape& t, Binder& bind, const std::string& prefix,
                             const TransformerConfig& cfg, Tape::Id x,
                             const std::vector<Tape::Id>& masks,
                             const std::vector<int>& lens) {
    if (masks.size() != lens.size())
        fail(Error::Kind::invalid_arg, "transformer_forward: " + std::to_string(masks.size()) +
                                           " masks for " + std::to_string(lens.size()) +
                                           " samples");
    int total = 0;
    for (int l : lens) total += l;
    if (t.shape_of(x)[0] != total)
        fail(Error::Kind::invalid_arg,
             "transformer_forward: stacked rows " + std::to_string(t.shape_of(x)[0]) +
                 " != sum of sample lengths " + std::to_string(total));
    const int d = cfg.d_model, H = cfg.heads, dh = d / H;
    const double scale = 1.0 / std::sqrt((double)dh);
    Tape::Id h = x;
    for (int l = 0; l < cfg.layers; ++l) {
        std::string lp = prefix + "l" + std::to_string(l) + "/";
        // attention sublayer
        Tape::Id a = t.layer_norm(h, bind(lp + "ln1/g"), bind(lp + "ln1/b"));
        Tape::Id q = t.add_rowvec(t.matmul(a, bind(lp + "attn/wq")), bind(lp + "attn/bq"));
        Tape::Id k = t.add_rowvec(t.matmul(a, bind(lp + "attn/wk")), bind(lp + "attn/bk"));
        Tape::Id v = t.add_rowvec(t.matmul(a, bind(lp + "attn/wv")), bind(lp + "attn/bv"));
        std::vector<Tape::Id> ctx_rows;
        int r0 = 0;
        for (size_t s = 0; s < lens.size(); ++s) {
            int r1 = r0 + lens[s];
            Tape::Id qs = t.slice_rows(q, r0, r1);
            Tape::Id ks = t.slice_rows(k, r0, r1);
            Tape::Id vs = t.slice_rows(v, r0, r1);
            std::vector<Tape::Id> heads;
            for (int hd = 0; hd < H; ++hd) {
                Tape::Id qh = t.slice_cols(qs, hd * dh, (hd + 1) * dh);
                Tape::Id kh = t.slice_cols(ks, hd * dh, (hd + 1) * dh);
                Tape::Id vh = t.slice_cols(vs, hd * dh, (hd + 1) * dh);
                Tape::Id scores = t.scale(t.matmul_nt(qh, kh), scale);
                Tape::Id attn = t.softmax_rows(t.add(scores, masks[s]));
                heads.push_back(t.matmul(attn, vh));
            }
            ctx_rows.push_back(t.concat_cols(heads));
            r0 = r1;
        }
        Tape::Id ctx = lens.size() == 1 ? ctx_rows[0] : t.concat_rows(ctx_rows);
        Tape::Id o = t.add_rowvec(t.matmul(ctx, bind(lp + "attn/wo")), bind(lp + "attn/bo"));
        h = t.add(h, o);
        // mlp sublayer
        Tape::Id m = t.layer_norm(h, bind(lp + "ln2/g"), bind(lp + "ln2/b"));
        Tape::Id m1 = t.gelu(t.add_rowvec(t.matmul(m, bind(lp + "mlp/w1")), bind(lp + "mlp/b1")));
        Tape::Id m2 = t.add_rowvec(t.matmul(m1, bind(lp + "mlp/w2")), bind(lp + "mlp/b2"));
        h = t.add(h, m2);
    }
    return t.layer_norm(h, bind(prefix + "lnf/g"), bind(prefix + "lnf/b"));
}

std::vector<double> sinusoid_embedding(double pos, int d) {
    std::vector<double> out(d);
    for (int i = 0; 2 * i < d; ++i) {
        double freq = std::pow(10000.0, -2.0 * i / d);
        out[2 * i] = std::sin(pos * freq);
        if (2 * i + 1 < d) out[2 * i + 1] = std::cos(pos * freq);
    }
    return out;
}

std::vector<double> sinusoid_2d(int row, int col, int d) {
    int dr = d / 2;
    std::vector<double> r = sinusoid_embedding(row, dr);
    std::vector<double> c = sinusoid_embedding(col, d - dr);
    r.insert(r.end(), c.begin(), c.end());
    return r;
}

} // namespace reca
