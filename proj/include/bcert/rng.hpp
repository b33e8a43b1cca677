#pragma once

// Deterministic random numbers. std::mt19937_64 has a pinned algorithm, but the
// standard distributions do not, so the uniform mappings are spelled out here to
// keep sampled streams identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <random>

namespace bcert {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). Rejection keeps the draw unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Standard normal via Box-Muller (deterministic, no cached spare).
    double normal() {
        double u1 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    /// Derives an independent stream, e.g. one per worker thread.
    Rng spawn(std::uint64_t stream) {
        return Rng(engine_() ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace bcert
