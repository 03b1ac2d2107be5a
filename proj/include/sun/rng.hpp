#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sun {

// Deterministic RNG. All draws go through explicit bit-level constructions so
// sequences are identical across standard library implementations.
class Rng {
 public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection sampling, unbiased.
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller. Two uniforms per draw, no caching, so the
    // stream position depends only on the number of calls.
    double normal() {
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Fisher-Yates over [first, last).
    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = bounded(i);
            std::swap(first[i - 1], first[j]);
        }
    }

 private:
    std::mt19937_64 engine_;
};

// Mixes a base seed with tags to derive independent sub-streams (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(base, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return derive_seed(derive_seed(base, a, b), c);
}

}  // namespace sun
