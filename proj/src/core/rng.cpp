#include "core/rng.hpp"

#include <cmath>

namespace reca {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng::Rng(uint64_t seed) {
    uint64_t sm = seed;
    uint64_t hi = splitmix64(sm);
    uint64_t lo = splitmix64(sm);
    state_ = ((unsigned __int128)hi << 64) | lo;
    // advance once so that similar seeds decorrelate immediately
    next_u64();
}

uint64_t Rng::next_u64() {
    // PCG XSL-RR 128/64, multiplier from the PCG reference implementation
    const unsigned __int128 mult =
        ((unsigned __int128)2549297995355413924ULL << 64) | 4865540595714422341ULL;
    const unsigned __int128 inc =
        ((unsigned __int128)6364136223846793005ULL << 64) | 1442695040888963407ULL;
    state_ = state_ * mult + inc;
    uint64_t xored = (uint64_t)(state_ >> 64) ^ (uint64_t)state_;
    unsigned rot = (unsigned)(state_ >> 122);
    return (xored >> rot) | (xored << ((-rot) & 63u));
}

double Rng::uniform() {
    return (double)(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

uint64_t Rng::below(uint64_t n) {
    // rejection sampling over the largest multiple of n
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::gauss() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log stays finite
    double u = uniform();
    if (u < 0x1.0p-53) u = 0x1.0p-53;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

Rng rng_stream(uint64_t experiment_seed, std::string_view stream_name) {
    uint64_t x = experiment_seed ^ fnv1a64(stream_name);
    return Rng(splitmix64(x));
}

Rng rng_stream(uint64_t experiment_seed, std::string_view stream_name, uint64_t index) {
    uint64_t x = experiment_seed ^ fnv1a64(stream_name);
    x = splitmix64(x) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return Rng(splitmix64(x));
}

} // namespace reca
