#pragma once

// Deterministic random helpers for tests. Raw splitmix64 draws with explicit
// reductions, so sequences do not depend on library implementations.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace testsupport {

struct rng {
    std::uint64_t state;

    explicit rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, k)
    int below(int k) { return static_cast<int>(next() % static_cast<std::uint64_t>(k)); }

    // uniform in (0, 1]
    double uniform() { return static_cast<double>((next() >> 11) + 1) * 0x1p-53; }

    double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform on the 1/8 lattice in [lo, hi]
    double lattice(double lo, double hi) {
        const int steps = static_cast<int>((hi - lo) * 8.0);
        return lo + below(steps + 1) / 8.0;
    }

    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
};

} // namespace testsupport
