#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "core/checkpoint.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"

using namespace reca;

TEST_SUITE_BEGIN("checkpoint");

namespace {
std::string tmp_path(const char* name) {
    return std::string("/tmp/recalab_test_") + name;
}
} // namespace

TEST_CASE("round trip is bit exact") {
    NamedArrays c;
    Rng r(17);
    std::vector<double> big(257);
    for (double& v : big) v = r.gauss() * 1e3;
    big[0] = 0.0;
    big[1] = -0.0;
    big[2] = 1e-308;        // subnormal-adjacent values must survive
    c.put("weights/w1", {257}, big);
    c.put("weights/w2", {4, 8}, std::vector<double>(32, -3.25));
    c.meta["role"] = "understanding";
    c.meta["config"] = "{\"d_model\":32}";

    std::string path = tmp_path("roundtrip.ckpt");
    save_checkpoint(path, c);
    NamedArrays back = load_checkpoint(path);

    REQUIRE(back.arrays.size() == 2);
    CHECK(back.extents("weights/w2") == std::vector<uint64_t>{4, 8});
    const std::vector<double>& w1 = back.data("weights/w1");
    REQUIRE(w1.size() == big.size());
    for (size_t i = 0; i < big.size(); ++i) {
        // bitwise comparison, not numeric: -0.0 must stay -0.0
        CHECK(std::memcmp(&w1[i], &big[i], sizeof(double)) == 0);
    }
    CHECK(back.meta_at("role") == "understanding");
    CHECK(back.meta_at("config") == "{\"d_model\":32}");
    std::remove(path.c_str());
}

TEST_CASE("saving twice produces identical bytes") {
    NamedArrays c;
    c.put("a", {3}, {1.0, 2.0, 3.0});
    c.meta["k"] = "v";
    std::string p1 = tmp_path("dup1.ckpt");
    std::string p2 = tmp_path("dup2.ckpt");
    save_checkpoint(p1, c);
    save_checkpoint(p2, c);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(b1.substr(0, 4) == "RECA");
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("bad magic is rejected") {
    std::string path = tmp_path("badmagic.ckpt");
    std::ofstream os(path, std::ios::binary);
    os << "NOPE then some bytes";
    os.close();
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("truncated file is rejected") {
    NamedArrays c;
    c.put("a", {64}, std::vector<double>(64, 1.0));
    std::string path = tmp_path("trunc.ckpt");
    save_checkpoint(path, c);
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), (std::streamsize)(bytes.size() / 2));
    os.close();
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("missing array lookups fail with the name") {
    NamedArrays c;
    try {
        c.data("ghost");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
}

TEST_SUITE_END();
