#pragma once

// Platform-independent seeded sampling. std::uniform_real_distribution is
// implementation-defined, so draws are mapped from raw 64-bit output here.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kronecker/phase.hpp"

namespace kronecker {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of sample `index` under `master`; independent of how samples are
/// distributed over workers.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform in the open interval (lo, hi).
    double uniform_open(double lo, double hi) {
        for (;;) {
            double v = uniform(lo, hi);
            if (v > lo && v < hi) return v;
        }
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Box of half-width `radius` on real slots, full circle on angular slots.
inline std::vector<double> sample_box(Rng& rng, const CoordinateLayout& layout, double radius) {
    std::vector<double> c(layout.dim());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = layout.is_angle(i) ? rng.uniform(-pi, pi) : rng.uniform(-radius, radius);
    return c;
}

/// Uniform point of a modular domain; unconstrained slots use [-radius, radius]
/// (reals) or the full circle (angles).
inline std::vector<double> sample_domain(Rng& rng, const ModularDomain& d, double radius = 1.0) {
    const auto& layout = *d.layout();
    std::vector<double> c(d.dim());
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (const auto& iv = d.interval(i)) c[i] = rng.uniform_open(iv->lo, iv->hi);
        else c[i] = layout.is_angle(i) ? rng.uniform(-pi, pi) : rng.uniform(-radius, radius);
    }
    return c;
}

}  // namespace kronecker
