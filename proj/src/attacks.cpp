#include "pullback/attacks.hpp"

#include <cmath>

#include "pullback/errors.hpp"
#include "pullback/metrics.hpp"

namespace pullback {

const char* to_string(AttackMode mode) {
    return mode == AttackMode::eigenvalue_scaled ? "eigenvalue-scaled" : "unit-step";
}

AttackMode parse_attack_mode(const std::string& name) {
    if (name == "scaled" || name == "eigenvalue-scaled") return AttackMode::eigenvalue_scaled;
    if (name == "unit" || name == "unit-step") return AttackMode::unit_step;
    throw InvalidArgument("unknown attack mode '" + name + "' (expected scaled or unit)");
}

void canonicalize_sign(std::span<double> v) {
    for (double c : v) {
        if (std::abs(c) > 1e-12) {
            if (c < 0.0)
                for (double& e : v) e = -e;
            return;
        }
    }
}

void evaluate_attack(const VaeModel& model, AttackResult& result) {
    const DenseVector mu0 = encode_mean(model, result.x_original);
    const DenseVector mu1 = encode_mean(model, result.x_corrupted);
    result.latent_shift = norm2(subtract(mu1, mu0));
    result.recon_mse = reconstruction_mse(result.x_original, decode_mean(model, mu1));
}

AttackResult eigen_step(const VaeModel& model, std::span<const double> x, const MetricTensor& metric, double delta,
                        std::size_t k, AttackMode mode) {
    if (x.size() != metric.dimension()) throw ShapeError("eigen_attack: metric dimension does not match the input");
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw InvalidArgument("eigen_attack: delta must be non-negative");
    const std::size_t rank = metric.numerical_rank();
    if (k < 1 || k > rank) {
        throw RankError("eigen_attack: eigen-index " + std::to_string(k) + " exceeds the numerical rank " +
                        std::to_string(rank));
    }
    const EigenDecomposition& eig = metric.eigen();
    AttackResult r;
    r.x_original.assign(x.begin(), x.end());
    r.direction = eig.vector(k - 1);
    canonicalize_sign(r.direction);
    r.eigenvalue = eig.values[k - 1];
    r.step = mode == AttackMode::eigenvalue_scaled ? delta * r.eigenvalue : delta;
    r.x_corrupted = axpy(r.step, r.direction, x);
    evaluate_attack(model, r);
    return r;
}

AttackResult eigen_attack(const VaeModel& model, std::span<const double> x, const MetricTensor& metric, double delta,
                          std::size_t k, AttackMode mode) {
    if (!(delta > 0.0)) throw InvalidArgument("eigen_attack: delta must be positive");
    return eigen_step(model, x, metric, delta, k, mode);
}

AttackResult eigen_attack(const VaeModel& model, std::span<const double> x, double delta, std::size_t k,
                          AttackMode mode, MetricSource source) {
    if (!(delta > 0.0)) throw InvalidArgument("eigen_attack: delta must be positive");
    return eigen_step(model, x, metric_at(model, x, source), delta, k, mode);
}

AttackResult pga_latent_attack(const VaeModel& model, std::span<const double> x, const PgaOptions& options,
                               RngState& rng) {
    if (!(options.eta0 > 0.0)) throw InvalidArgument("pga_latent_attack: eta0 must be positive");
    if (options.steps < 1) throw InvalidArgument("pga_latent_attack: steps must be at least 1");
    if (!(options.step_size > 0.0)) throw InvalidArgument("pga_latent_attack: step_size must be positive");

    const DenseVector mu0 = encode_mean(model, x);
    DenseVector eta = sample_unit_sphere(rng, x.size());
    for (double& v : eta) v *= options.eta0 / 10.0;

    const auto objective = [&](const DenseVector& e, DenseVector* grad) {
        const DenseVector xe = axpy(1.0, e, x);
        const DenseVector diff = subtract(encode_mean(model, xe), mu0);
        if (grad) {
            // ∇‖μ(x+η) − μ(x)‖² = 2 J_μᵀ (μ(x+η) − μ(x))
            const DenseMatrix j = matmul(model.mu_head.input_jacobian(model.encoder_trunk.evaluate(xe)),
                                         model.encoder_trunk.input_jacobian(xe));
            *grad = matvec_t(j, diff);
            for (double& g : *grad) g *= 2.0;
        }
        return squared_norm(diff);
    };

    DenseVector best = eta;
    double best_d = objective(eta, nullptr);
    DenseVector grad;
    for (std::size_t s = 0; s < options.steps; ++s) {
        const double d = objective(eta, &grad);
        if (!std::isfinite(d) || !all_finite(grad)) {
            throw NumericalError("pga_latent_attack: objective diverged at step " + std::to_string(s + 1));
        }
        if (d > best_d) {
            best_d = d;
            best = eta;
        }
        const double gnorm = norm2(grad);
        if (gnorm == 0.0) break;
        const double length = options.step_size * options.eta0;
        for (std::size_t i = 0; i < eta.size(); ++i) eta[i] += length * grad[i] / gnorm;
        const double enorm = norm2(eta);
        if (enorm > options.eta0)
            for (double& v : eta) v *= options.eta0 / enorm;
    }
    const double d = objective(eta, nullptr);
    if (!std::isfinite(d)) throw NumericalError("pga_latent_attack: objective diverged at the final iterate");
    if (d > best_d) {
        best_d = d;
        best = eta;
    }

    AttackResult r;
    r.x_original.assign(x.begin(), x.end());
    r.step = norm2(best);
    r.direction = best;
    if (r.step > 0.0)
        for (double& v : r.direction) v /= r.step;
    r.x_corrupted = axpy(1.0, best, x);
    evaluate_attack(model, r);
    return r;
}

AttackResult random_direction_attack(const VaeModel& model, std::span<const double> x, double step_norm,
                                     RngState& rng) {
    if (!(step_norm > 0.0)) throw InvalidArgument("random_direction_attack: step_norm must be positive");
    AttackResult r;
    r.x_original.assign(x.begin(), x.end());
    r.direction = sample_unit_sphere(rng, x.size());
    r.step = step_norm;
    r.x_corrupted = axpy(step_norm, r.direction, x);
    evaluate_attack(model, r);
    return r;
}

}  // namespace pullback
