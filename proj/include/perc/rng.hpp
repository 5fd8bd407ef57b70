#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace perc {

// Splittable counter-based RNG. A master seed plus a path of stream ids
// (experiment, cell, trial, layer, ...) derives an independent stream;
// identical (seed, path) always yields the identical sequence, so results
// do not depend on scheduling or thread count.
class RngStream {
public:
    RngStream() : state_(0x9e3779b97f4a7c15ull) {}
    explicit RngStream(std::uint64_t seed) : state_(mix(seed)) {}

    static std::uint64_t derive_key(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
        std::uint64_t s = mix(master ^ 0xd1b54a32d192ed03ull);
        for (std::uint64_t id : path)
            s = mix(s ^ mix(id + 0x632be59bd9b4e019ull));
        return s;
    }

    static RngStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
        return RngStream(derive_key(master, path));
    }

    static RngStream from_key(std::uint64_t key) { return RngStream(key); }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        return mix(state_);
    }

    // uniform in [0,1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [0,1] excluding exact 0, for safe logs
    double uniform01_pos() {
        double u;
        do { u = uniform01(); } while (u <= 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64 and the
        // acceptance tolerances used here
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Poisson sample: inversion by sequential search for small means,
    // PTRS transformed rejection for large means.
    std::uint64_t poisson(double mean);

private:
    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finalizer
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

inline std::uint64_t RngStream::poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
        // multiplication method (inversion in the exp domain)
        const double g = std::exp(-mean);
        std::uint64_t k = 0;
        double t = uniform01_pos();
        while (t > g) {
            ++k;
            t *= uniform01_pos();
        }
        return k;
    }
    // PTRS (Hormann 1993), exact rejection sampler
    const double b = 0.931 + 2.53 * std::sqrt(mean);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        double u = uniform01() - 0.5;
        double v = uniform01_pos();
        double us = 0.5 - std::fabs(u);
        double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
        double rhs = -mean + k * std::log(mean) - std::lgamma(k + 1.0);
        if (lhs <= rhs) return static_cast<std::uint64_t>(k);
    }
}

} // namespace perc
