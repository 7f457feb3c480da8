#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/rng.hpp"

using namespace reca;

TEST_SUITE_BEGIN("rng");

TEST_CASE("same seed, same sequence") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("named streams are independent and reproducible") {
    Rng a = rng_stream(7, "alpha");
    Rng a2 = rng_stream(7, "alpha");
    Rng b = rng_stream(7, "beta");
    CHECK(a.next_u64() == a2.next_u64());
    // different names should decorrelate immediately
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (rng_stream(7, "alpha").next_u64() == rng_stream(7 + i + 1, "alpha").next_u64())
            ++same;
    CHECK(same == 0);
    (void)b;
}

TEST_CASE("indexed streams differ per index") {
    CHECK(rng_stream(3, "train", 0).next_u64() != rng_stream(3, "train", 1).next_u64());
    CHECK(rng_stream(3, "train", 5).next_u64() == rng_stream(3, "train", 5).next_u64());
}

TEST_CASE("uniform lands in [0,1) with a sane mean") {
    Rng r(123);
    double acc = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        acc += u;
    }
    // mean 1/2, sd of the mean = 1/sqrt(12 n); allow 4 sigma
    CHECK(std::fabs(acc / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("below(n) is unbiased across residues") {
    Rng r(9);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[r.below(7)];
    for (int c : counts) {
        // expected 10000, sd ~ sqrt(10000 * 6/7) ~ 93; allow 5 sigma
        CHECK(std::fabs(c - n / 7.0) < 5 * std::sqrt(n / 7.0));
    }
}

TEST_CASE("gauss moments") {
    Rng r(31);
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = r.gauss();
        s1 += g;
        s2 += g * g;
    }
    double mean = s1 / n;
    double var = s2 / n - mean * mean;
    CHECK(std::fabs(mean) < 4.0 / std::sqrt((double)n));          // sd of mean = 1/sqrt(n)
    CHECK(std::fabs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));       // sd of var ~ sqrt(2/n)
}

TEST_CASE("fnv1a64 known vectors") {
    // reference values from the FNV-1a specification
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_SUITE_END();
