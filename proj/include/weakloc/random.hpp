#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace weakloc {

/// Derives a child seed from (seed, stream name) so that independent parts
/// of a run (sampler, noise, shuffles) draw from decoupled streams while the
/// whole run stays reproducible from one root seed. FNV-1a over the name,
/// folded with the seed and finalized with a splitmix round.
inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::string_view name) {
    return std::mt19937_64(substream_seed(seed, name));
}

/// Uniform double in [0, 1) built directly from the top 53 bits, so the
/// mapping from engine output to value is fixed across standard libraries.
inline double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n); n must be >= 1. Rejection-free scaling is
/// fine here since n is tiny compared to 2^53.
inline std::int64_t next_index(std::mt19937_64& rng, std::int64_t n) {
    auto idx = static_cast<std::int64_t>(next_unit(rng) * static_cast<double>(n));
    return idx < n ? idx : n - 1;
}

/// Standard normal via Box-Muller on the fixed-layout uniforms above.
inline double next_normal(std::mt19937_64& rng) {
    double u1 = 0.0;
    do {
        u1 = next_unit(rng);
    } while (u1 <= 0.0);
    double u2 = next_unit(rng);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

}  // namespace weakloc
