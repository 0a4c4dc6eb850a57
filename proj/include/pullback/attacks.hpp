#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "pullback/geometry.hpp"
#include "pullback/linalg.hpp"
#include "pullback/rng.hpp"
#include "pullback/vae.hpp"

namespace pullback {

// Step sizes of the reference one-step demonstration.
inline constexpr double kDemoDeltaSmall = 0.5233;
inline constexpr double kDemoDeltaLarge = 0.7443;

enum class AttackMode {
    eigenvalue_scaled,  // x + δ·λ_k·v_k
    unit_step,          // x + δ·v_k
};

const char* to_string(AttackMode mode);
// Accepts "scaled"/"unit" as well as the full names.
AttackMode parse_attack_mode(const std::string& name);

struct AttackResult {
    DenseVector x_original;
    DenseVector x_corrupted;
    DenseVector direction;  // unit l2 norm
    double step = 0.0;
    double eigenvalue = 0.0;     // eigen attack only
    double latent_shift = 0.0;   // ‖μ(x_c) − μ(x)‖
    double recon_mse = 0.0;      // MSE(x, decode(μ(x_c)))
};

// Flips v so that its first entry with magnitude above 1e-12 is positive.
void canonicalize_sign(std::span<double> v);

// One step along the k-th (1-based) eigendirection of `metric`, evaluated at x.
// Throws RankError when k exceeds the numerical rank, InvalidArgument when
// delta ≤ 0.
AttackResult eigen_attack(const VaeModel& model, std::span<const double> x, const MetricTensor& metric, double delta,
                          std::size_t k, AttackMode mode = AttackMode::eigenvalue_scaled);
AttackResult eigen_attack(const VaeModel& model, std::span<const double> x, double delta, std::size_t k,
                          AttackMode mode = AttackMode::eigenvalue_scaled,
                          MetricSource source = MetricSource::encoder_flat);

// Same as eigen_attack but allows delta = 0 (the unperturbed input); used by
// step-size sweeps that include the origin.
AttackResult eigen_step(const VaeModel& model, std::span<const double> x, const MetricTensor& metric, double delta,
                        std::size_t k, AttackMode mode);

struct PgaOptions {
    double eta0 = 1.0;          // l2 budget
    std::size_t steps = 200;
    double step_size = 0.5;     // ascent step length as a fraction of eta0
};

// Projected gradient ascent of ‖μ(x + η) − μ(x)‖² over ‖η‖ ≤ η₀. Starts from a
// random η of norm η₀/10 and returns the best iterate seen.
AttackResult pga_latent_attack(const VaeModel& model, std::span<const double> x, const PgaOptions& options,
                               RngState& rng);

// x + step_norm·u with u uniform on the unit sphere.
AttackResult random_direction_attack(const VaeModel& model, std::span<const double> x, double step_norm,
                                     RngState& rng);

// Fills latent_shift and recon_mse for x_corrupted.
void evaluate_attack(const VaeModel& model, AttackResult& result);

}  // namespace pullback
