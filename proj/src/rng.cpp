#include "pullback/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t state = base ^ (0xd1b54a32d192ed03ULL * (index + 1));
    splitmix64(state);
    return splitmix64(state);
}

RngState::RngState(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t RngState::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngState::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t RngState::uniform_index(std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: empty range");
    // Rejection keeps the draw unbiased for every n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
        r = next_u64();
    } while (r >= limit);
    return static_cast<std::size_t>(r % n);
}

double RngState::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

DenseVector sample_std_normal(RngState& rng, std::size_t n) {
    DenseVector out(n);
    for (double& v : out) v = rng.normal();
    return out;
}

double sample_gamma(RngState& rng, double shape) {
    if (!(shape > 0.0)) throw InvalidArgument("sample_gamma: shape must be positive");
    if (shape < 1.0) {
        // Boost to shape + 1 and correct with U^(1/shape).
        const double u = 1.0 - rng.uniform();
        return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = 1.0 - rng.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}

double sample_beta(RngState& rng, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw InvalidArgument("sample_beta: shapes must be positive, got a=" + std::to_string(a) +
                              " b=" + std::to_string(b));
    }
    for (;;) {
        double value;
        if (a + b <= 2.0) {
            // Jöhnk, in log space so that small shapes do not underflow.
            const double log_x = std::log(1.0 - rng.uniform()) / a;
            const double log_y = std::log(1.0 - rng.uniform()) / b;
            const double log_sum = log_sum_exp(log_x, log_y);
            if (log_sum > 0.0) continue;
            value = std::exp(log_x - log_sum);
        } else {
            const double x = sample_gamma(rng, a);
            const double y = sample_gamma(rng, b);
            value = x / (x + y);
        }
        if (value > 0.0 && value < 1.0) return value;
    }
}

DenseVector sample_unit_sphere(RngState& rng, std::size_t n) {
    if (n == 0) throw InvalidArgument("sample_unit_sphere: dimension must be positive");
    for (;;) {
        DenseVector u = sample_std_normal(rng, n);
        const double len = norm2(u);
        if (len < 1e-300) continue;
        for (double& v : u) v /= len;
        return u;
    }
}

}  // namespace pullback
