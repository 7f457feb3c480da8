#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace reca {

// PCG XSL-RR 128/64 ("pcg64"): 128-bit LCG state, 64-bit output.
// Every consumer draws from its own named stream so that adding a new
// randomness consumer never perturbs existing ones.
//
// Seed derivation (documented contract):
//   stream_seed = splitmix64(experiment_seed ^ fnv1a64(stream_name))
//   state       = splitmix64 sequence from stream_seed (two words)
// fnv1a64 is the 64-bit FNV-1a hash of the UTF-8 stream name.
class Rng {
public:
    Rng() : Rng(0x853c49e6748fea9bULL) {}
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    // uniform in [0,1) with 53 random mantissa bits
    double uniform();
    // uniform in [lo,hi)
    double uniform(double lo, double hi);
    // uniform integer in [0,n), n > 0; rejection-sampled, no modulo bias
    uint64_t below(uint64_t n);
    // standard normal via Box-Muller; caches the second value of each pair
    double gauss();

private:
    unsigned __int128 state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t& x);

// Stream-derived generator: hash the name into the experiment seed.
Rng rng_stream(uint64_t experiment_seed, std::string_view stream_name);

// Convenience for per-step streams: "<phase>/step" + step index.
Rng rng_stream(uint64_t experiment_seed, std::string_view stream_name, uint64_t index);

} // namespace reca
