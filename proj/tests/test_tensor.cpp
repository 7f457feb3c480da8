#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/gradcheck.hpp"
#include "core/optim.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace reca;

TEST_SUITE_BEGIN("tensor");

namespace {

std::vector<double> random_vec(int64_t n, uint64_t seed, const char* stream) {
    Rng r = rng_stream(seed, stream);
    std::vector<double> v(n);
    for (double& x : v) x = r.uniform(-1.0, 1.0);
    return v;
}

// gradcheck an op through a fixed random readout so every coordinate matters
void check_op(const char* name, Shape in_shape,
              const std::function<Tape::Id(Tape&, Tape::Id)>& op) {
    for (uint64_t seed : {11u, 22u, 33u}) {
        ParamStore ps;
        Param& p = ps.add_gaussian("x", in_shape, 0.5, seed);
        std::vector<double> readout;  // filled on first run, shape of op output
        auto run = [&](bool do_backward) {
            Tape t;
            Tape::Id x = t.leaf(p.w.data(), p.shape, true, p.g.data());
            Tape::Id y = op(t, x);
            if (readout.empty())
                readout = random_vec(numel(t.shape_of(y)), seed, "readout");
            Tape::Id loss = t.mean_all(t.mul(y, t.constant(readout, t.shape_of(y))));
            double v = t.val(loss)[0];
            if (do_backward) t.backward(loss);
            return v;
        };
        GradCheckReport rep = gradcheck(ps, run, 12, seed);
        INFO(name, " seed ", seed, " worst ", rep.worst_param, "[", rep.worst_index, "]");
        CHECK(rep.max_rel_err < 1e-4);
    }
}

} // namespace

TEST_CASE("matmul against a hand-computed product") {
    Tape t;
    Tape::Id a = t.constant({1, 2, 3, 4, 5, 6}, {2, 3});
    Tape::Id b = t.constant({7, 8, 9, 10, 11, 12}, {3, 2});
    Tape::Id c = t.matmul(a, b);
    const double* v = t.val(c);
    CHECK(v[0] == doctest::Approx(58));
    CHECK(v[1] == doctest::Approx(64));
    CHECK(v[2] == doctest::Approx(139));
    CHECK(v[3] == doctest::Approx(154));
}

TEST_CASE("matmul shape error names both shapes") {
    Tape t;
    Tape::Id a = t.constant(std::vector<double>(6, 0.0), {2, 3});
    Tape::Id b = t.constant(std::vector<double>(8, 0.0), {4, 2});
    try {
        t.matmul(a, b);
        FAIL("expected a shape error");
    } catch (const Error& e) {
        CHECK(e.kind == Error::Kind::invalid_arg);
        std::string msg = e.what();
        CHECK(msg.find("(2x3)") != std::string::npos);
        CHECK(msg.find("(4x2)") != std::string::npos);
    }
}

TEST_CASE("softmax rows sum to one") {
    Rng r(5);
    std::vector<double> v(7 * 31);
    for (double& x : v) x = r.uniform(-30.0, 30.0);
    Tape t;
    Tape::Id y = t.softmax_rows(t.constant(v, {7, 31}));
    const double* p = t.val(y);
    for (int i = 0; i < 7; ++i) {
        double s = 0.0;
        for (int j = 0; j < 31; ++j) {
            CHECK(p[i * 31 + j] >= 0.0);
            s += p[i * 31 + j];
        }
        CHECK(std::fabs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("cross entropy of uniform logits is ln K") {
    Tape t;
    Tape::Id logits = t.constant(std::vector<double>(3 * 4, 0.7), {3, 4});
    Tape::Id loss = t.cross_entropy(logits, {0, 1, 3});
    CHECK(std::fabs(t.val(loss)[0] - std::log(4.0)) < 1e-9);
}

TEST_CASE("cross entropy rejects an out-of-range target") {
    Tape t;
    Tape::Id logits = t.constant(std::vector<double>(4, 0.0), {1, 4});
    CHECK_THROWS_AS(t.cross_entropy(logits, {4}), Error);
}

TEST_CASE("mse oracle") {
    Tape t;
    Tape::Id p = t.constant({1.0, 2.0, 3.0}, {1, 3});
    Tape::Id loss = t.mse(p, {0.0, 2.0, 5.0});
    CHECK(t.val(loss)[0] == doctest::Approx((1.0 + 0.0 + 4.0) / 3.0));
}

TEST_CASE("mask_fill writes the sentinel and blocks gradient there") {
    ParamStore ps;
    Param& p = ps.add_gaussian("x", {2, 2}, 1.0, 1);
    std::vector<uint8_t> mask = {0, 1, 1, 0};
    Tape t;
    Tape::Id x = t.leaf(p.w.data(), p.shape, true, p.g.data());
    Tape::Id y = t.mask_fill(x, mask, -9.5);
    CHECK(t.val(y)[1] == -9.5);
    CHECK(t.val(y)[2] == -9.5);
    CHECK(t.val(y)[0] == p.w[0]);
    Tape::Id loss = t.mean_all(y);
    t.backward(loss);
    CHECK(p.g[0] == doctest::Approx(0.25));
    CHECK(p.g[1] == 0.0);
    CHECK(p.g[2] == 0.0);
}

TEST_CASE("gather with the identity index is the identity") {
    Tape t;
    std::vector<double> v = random_vec(5 * 3, 2, "gather");
    Tape::Id x = t.constant(v, {5, 3});
    Tape::Id y = t.gather_rows(x, {0, 1, 2, 3, 4});
    CHECK(t.val_copy(y) == v);
}

TEST_CASE("backward may run only once per tape") {
    Tape t;
    ParamStore ps;
    Param& p = ps.add_gaussian("x", {1}, 1.0, 3);
    Tape::Id x = t.leaf(p.w.data(), p.shape, true, p.g.data());
    Tape::Id loss = t.mean_all(x);
    t.backward(loss);
    CHECK_THROWS_AS(t.backward(loss), Error);
}

// ----- finite-difference checks, one per differentiable operation -----

TEST_CASE("gradcheck: matmul") {
    check_op("matmul", {4, 3}, [](Tape& t, Tape::Id x) {
        Tape::Id w = t.constant(random_vec(3 * 5, 99, "w"), {3, 5});
        return t.matmul(x, w);
    });
    // and through the second operand
    check_op("matmul_rhs", {3, 5}, [](Tape& t, Tape::Id x) {
        Tape::Id a = t.constant(random_vec(4 * 3, 98, "a"), {4, 3});
        return t.matmul(a, x);
    });
}

TEST_CASE("gradcheck: matmul_nt") {
    check_op("matmul_nt", {4, 3}, [](Tape& t, Tape::Id x) {
        Tape::Id w = t.constant(random_vec(5 * 3, 97, "w"), {5, 3});
        return t.matmul_nt(x, w);
    });
    check_op("matmul_nt_rhs", {5, 3}, [](Tape& t, Tape::Id x) {
        Tape::Id a = t.constant(random_vec(4 * 3, 96, "a"), {4, 3});
        return t.matmul_nt(a, x);
    });
}

TEST_CASE("gradcheck: elementwise suite") {
    check_op("add", {3, 4}, [](Tape& t, Tape::Id x) {
        return t.add(x, t.constant(random_vec(12, 95, "b"), {3, 4}));
    });
    check_op("add_rowvec", {3, 4}, [](Tape& t, Tape::Id x) {
        Tape::Id b = t.constant(random_vec(4, 94, "b"), {4});
        return t.add_rowvec(x, b);
    });
    check_op("mul", {3, 4}, [](Tape& t, Tape::Id x) {
        return t.mul(x, t.constant(random_vec(12, 93, "b"), {3, 4}));
    });
    check_op("scale", {3, 4}, [](Tape& t, Tape::Id x) { return t.scale(x, -1.7); });
    check_op("add_const", {3, 4},
             [](Tape& t, Tape::Id x) { return t.add_const(x, random_vec(12, 92, "c")); });
    check_op("mask_fill", {3, 4}, [](Tape& t, Tape::Id x) {
        std::vector<uint8_t> mask(12, 0);
        mask[3] = mask[7] = 1;
        return t.mask_fill(x, mask, 2.5);
    });
    check_op("gelu", {3, 4}, [](Tape& t, Tape::Id x) { return t.gelu(x); });
}

TEST_CASE("gradcheck: mul_scalar_node both sides") {
    for (uint64_t seed : {11u, 22u, 33u}) {
        ParamStore ps;
        Param& x = ps.add_gaussian("x", {3, 4}, 0.5, seed);
        Param& s = ps.add_gaussian("s", {1}, 0.5, seed + 100);
        std::vector<double> readout = random_vec(12, seed, "ro");
        auto run = [&](bool do_backward) {
            Tape t;
            Tape::Id xi = t.leaf(x.w.data(), x.shape, true, x.g.data());
            Tape::Id si = t.leaf(s.w.data(), s.shape, true, s.g.data());
            Tape::Id y = t.mul_scalar_node(xi, si);
            Tape::Id loss = t.mean_all(t.mul(y, t.constant(readout, {3, 4})));
            double v = t.val(loss)[0];
            if (do_backward) t.backward(loss);
            return v;
        };
        GradCheckReport rep = gradcheck(ps, run, 12, seed);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("gradcheck: shape rearrangers") {
    check_op("concat_rows", {2, 3}, [](Tape& t, Tape::Id x) {
        Tape::Id other = t.constant(random_vec(9, 91, "o"), {3, 3});
        return t.concat_rows({x, other, x});
    });
    check_op("concat_cols", {3, 2}, [](Tape& t, Tape::Id x) {
        Tape::Id other = t.constant(random_vec(9, 90, "o"), {3, 3});
        return t.concat_cols({other, x});
    });
    check_op("slice_rows", {5, 3}, [](Tape& t, Tape::Id x) { return t.slice_rows(x, 1, 4); });
    check_op("slice_cols", {3, 5}, [](Tape& t, Tape::Id x) { return t.slice_cols(x, 2, 5); });
    check_op("gather_rows", {5, 3},
             [](Tape& t, Tape::Id x) { return t.gather_rows(x, {4, 0, 0, 2}); });
}

TEST_CASE("gradcheck: softmax and layer_norm") {
    check_op("softmax_rows", {3, 6}, [](Tape& t, Tape::Id x) { return t.softmax_rows(x); });
    for (uint64_t seed : {11u, 22u, 33u}) {
        ParamStore ps;
        Param& x = ps.add_gaussian("x", {4, 6}, 0.8, seed);
        Param& g = ps.add_gaussian("g", {6}, 0.5, seed + 1);
        Param& b = ps.add_gaussian("b", {6}, 0.5, seed + 2);
        std::vector<double> readout = random_vec(24, seed, "ro_ln");
        auto run = [&](bool do_backward) {
            Tape t;
            Tape::Id xi = t.leaf(x.w.data(), x.shape, true, x.g.data());
            Tape::Id gi = t.leaf(g.w.data(), g.shape, true, g.g.data());
            Tape::Id bi = t.leaf(b.w.data(), b.shape, true, b.g.data());
            Tape::Id y = t.layer_norm(xi, gi, bi);
            Tape::Id loss = t.mean_all(t.mul(y, t.constant(readout, {4, 6})));
            double v = t.val(loss)[0];
            if (do_backward) t.backward(loss);
            return v;
        };
        GradCheckReport rep = gradcheck(ps, run, 16, seed);
        INFO("layer_norm worst ", rep.worst_param);
        CHECK(rep.max_rel_err < 1e-4);
    }
}

TEST_CASE("gradcheck: losses") {
    check_op("mean_all", {3, 4}, [](Tape& t, Tape::Id x) { return t.mean_all(x); });
    check_op("cross_entropy", {4, 5},
             [](Tape& t, Tape::Id x) { return t.cross_entropy(x, {0, 2, 4, 1}); });
    check_op("mse", {3, 4},
             [](Tape& t, Tape::Id x) { return t.mse(x, random_vec(12, 89, "t")); });
}

// ----- optimizer --------------------------------------------------------------

TEST_CASE("adamw: zero gradient decays weights by lr*wd*w") {
    ParamStore ps;
    Param& p = ps.add_zeros("w", {3});
    p.w = {1.0, -2.0, 0.5};
    AdamW opt;  // lr 1e-3, wd 0.01
    ps.zero_grads();
    opt.step(ps);
    CHECK(p.w[0] == doctest::Approx(1.0 * (1 - 1e-3 * 0.01)).epsilon(1e-12));
    CHECK(p.w[1] == doctest::Approx(-2.0 * (1 - 1e-3 * 0.01)).epsilon(1e-12));
    CHECK(p.w[2] == doctest::Approx(0.5 * (1 - 1e-3 * 0.01)).epsilon(1e-12));
}

TEST_CASE("adamw: first step moves by ~lr against the gradient sign") {
    ParamStore ps;
    Param& p = ps.add_zeros("w", {1});
    p.w = {0.0};
    p.g = {3.7};  // any positive gradient
    AdamW opt;
    opt.step(ps);
    // bias-corrected first step: mhat/ (sqrt(vhat)+eps) = g/(|g|+eps) ~ 1
    CHECK(p.w[0] == doctest::Approx(-opt.lr).epsilon(1e-4));
}

TEST_CASE("adamw leaves frozen parameters untouched") {
    ParamStore ps;
    Param& p = ps.add_zeros("w", {2});
    p.w = {1.0, 1.0};
    p.g = {5.0, 5.0};
    p.trainable = false;
    AdamW opt;
    opt.step(ps);
    CHECK(p.w[0] == 1.0);
    CHECK(p.w[1] == 1.0);
}

// ----- determinism ------------------------------------------------------------

TEST_CASE("a toy training loop replays bit-identically") {
    auto run_losses = [] {
        ParamStore ps;
        ps.add_gaussian("w", {3, 1}, 0.3, 7);
        AdamW opt;
        std::vector<double> losses;
        for (int step = 0; step < 20; ++step) {
            Rng r = rng_stream(7, "toy/batch", (uint64_t)step);
            std::vector<double> xv(5 * 3), yv(5);
            for (double& x : xv) x = r.uniform(-1, 1);
            for (size_t i = 0; i < 5; ++i) yv[i] = xv[i * 3] * 2.0 - xv[i * 3 + 2];
            ps.zero_grads();
            Param& w = ps.at("w");
            Tape t;
            Tape::Id xi = t.constant(xv, {5, 3});
            Tape::Id wi = t.leaf(w.w.data(), w.shape, true, w.g.data());
            Tape::Id pred = t.matmul(xi, wi);
            Tape::Id loss = t.mse(pred, yv);
            losses.push_back(t.val(loss)[0]);
            t.backward(loss);
            opt.step(ps);
        }
        return losses;
    };
    std::vector<double> a = run_losses();
    std::vector<double> b = run_losses();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // bitwise
    CHECK(a.back() < a.front());  // and it actually learns
}

TEST_SUITE_END();
