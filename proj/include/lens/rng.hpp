// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef LENS_RNG_HPP
#define LENS_RNG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "lens/error.hpp"

namespace lens {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seedable deterministic generator. The engine is std::mt19937_64 (its
/// sequence is pinned by the standard); the distributions are implemented
/// here because the standard library's are not portable across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent substream for (seed, stream): layers and items draw from
    /// decorrelated streams while full runs stay reproducible.
    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        return Rng(splitmix64(splitmix64(seed) ^ stream));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound) via masked rejection (unbiased).
    std::size_t uniform_below(std::size_t bound) {
        if (bound == 0) fail("Rng::uniform_below: bound must be positive");
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1; mask |= mask >> 2; mask |= mask >> 4;
        mask |= mask >> 8; mask |= mask >> 16; mask |= mask >> 32;
        for (;;) {
            std::uint64_t v = next_u64() & mask;
            if (v < bound) return static_cast<std::size_t>(v);
        }
    }

    /// Uniform double in (0, 1].
    double uniform01() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second deviate of each pair is
    /// stashed.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// m distinct indices drawn uniformly from [0, n), returned ascending.
    /// Ascending order makes downstream accumulations independent of the
    /// draw order, so m == n yields an rng-free result.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m) {
        if (m > n) fail("Rng::sample_without_replacement: m exceeds n");
        std::vector<std::size_t> pool(n);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < m; ++i)
            std::swap(pool[i], pool[i + uniform_below(n - i)]);
        pool.resize(m);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lens

#endif  // LENS_RNG_HPP
