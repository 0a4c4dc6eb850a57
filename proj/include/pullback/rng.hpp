#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "pullback/linalg.hpp"

namespace pullback {

// xoshiro256** seeded through splitmix64. Identical seeds yield identical
// streams on every platform. Single owner; give each worker its own state
// via derive_seed.
class RngState {
public:
    explicit RngState(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n);
    // Standard normal via Box–Muller; the second variate of each pair is cached.
    double normal();

    friend bool operator==(const RngState&, const RngState&) = default;

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> s_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);
// Seed for worker/job `index` under `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

DenseVector sample_std_normal(RngState& rng, std::size_t n);

// Beta(a, b): Jöhnk's method when a + b ≤ 2, gamma ratio otherwise. The
// result lies strictly inside (0, 1).
double sample_beta(RngState& rng, double a, double b);

// Marsaglia–Tsang, shape > 0, unit scale.
double sample_gamma(RngState& rng, double shape);

// Uniform on the unit sphere in R^n.
DenseVector sample_unit_sphere(RngState& rng, std::size_t n);

}  // namespace pullback
