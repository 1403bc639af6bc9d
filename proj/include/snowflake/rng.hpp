#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace snowflake {

// Deterministic RNG used everywhere randomness is needed (weight init, shape
// synthesis, batch selection). mt19937_64 is fully specified by the standard
// and the uniform/normal mappings below are pinned here, so identical seeds
// give identical streams on every platform. std::*_distribution is avoided on
// purpose: its output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniforms per draw, no cached state.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // In [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection-free modulo is biased; n is tiny relative to 2^64 here so
        // the bias is < 2^-50 and never observable, but keep it exact anyway.
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64 step; used to derive per-entry seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    return mix_seed(mix_seed(master ^ mix_seed(a)) ^ mix_seed(b + 0x632be59bd9b4e019ULL));
}

}  // namespace snowflake
