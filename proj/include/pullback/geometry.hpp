#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "pullback/linalg.hpp"
#include "pullback/rng.hpp"
#include "pullback/vae.hpp"

namespace pullback {

enum class MetricSource { encoder_flat, encoder_decoder_combined, decoder, estimate };

const char* to_string(MetricSource source);
// Accepts "encoder" and "combined" (CLI spelling) as well as the full names.
MetricSource parse_metric_source(const std::string& name);

// Symmetric PSD metric, held either as a factor F with G = FᵀF or as a dense
// matrix. The eigendecomposition is computed on first use: through gram_eig
// when F has no more rows than columns, through sym_eig otherwise.
class MetricTensor {
public:
    static MetricTensor from_factor(DenseMatrix factor, MetricSource source);
    static MetricTensor from_dense(DenseMatrix matrix, MetricSource source);

    std::size_t dimension() const noexcept;
    MetricSource source() const noexcept { return source_; }
    bool is_factored() const noexcept { return factor_.has_value(); }
    const DenseMatrix& factor() const;
    // Dense N×N assembly. For a factored metric this forms FᵀF.
    DenseMatrix dense() const;
    const EigenDecomposition& eigen() const;
    // Number of eigenvalues above 1e-10·λ_max.
    std::size_t numerical_rank() const;

private:
    MetricTensor() = default;

    std::optional<DenseMatrix> factor_;
    std::optional<DenseMatrix> dense_;
    MetricSource source_ = MetricSource::encoder_flat;
    mutable std::optional<EigenDecomposition> eig_;
};

// Jacobians of the encoder mean and standard deviation, d_z × N.
struct JacobianPair {
    DenseMatrix j_mu;
    DenseMatrix j_sigma;
};

// j_sigma = diag(σ)·∂log σ/∂x; rows of latent coordinates whose log σ is
// clamped are zero.
JacobianPair encoder_jacobians(const VaeModel& model, std::span<const double> x);

// Ĝ = J_μᵀJ_μ + J_σᵀJ_σ, factored as F = [J_μ; J_σ].
MetricTensor pullback_metric(const JacobianPair& jp);

// (J_μ + diag(ε)J_σ)ᵀ(J_μ + diag(ε)J_σ) for a single noise draw.
DenseMatrix sampled_pullback(const JacobianPair& jp, std::span<const double> epsilon);

// Average of sampled_pullback over k independent draws of ε ~ N(0, I).
MetricTensor expected_metric_mc(const JacobianPair& jp, std::size_t k, RngState& rng);
MetricTensor expected_metric_mc(const VaeModel& model, std::span<const double> x, std::size_t k, RngState& rng);

// Jacobians of the decoder mean (and log-σ head scaled to σ) at z, N × d_z.
struct DecoderJacobians {
    DenseMatrix j_mu;
    std::optional<DenseMatrix> j_sigma;
};
DecoderJacobians decoder_jacobians(const VaeModel& model, std::span<const double> z);

// G_z = J_μᵀJ_μ + J_σᵀJ_σ on the latent space.
MetricTensor decoder_metric(const VaeModel& model, std::span<const double> z);

// J_μᵀ G_z J_μ + J_σᵀ G_z J_σ with G_z taken at z = μ(x). Stored as
// F = [B·J_μ; B·J_σ] where BᵀB = G_z and B has d_z rows.
MetricTensor combined_metric(const VaeModel& model, std::span<const double> x);

// Dense-path assembly of the combined metric.
DenseMatrix combined_metric_dense(const VaeModel& model, std::span<const double> x);

// ηᵀGη, as ‖Fη‖² when factored.
double quadratic_form(const MetricTensor& g, std::span<const double> eta);

// Metric of the requested source at x (encoder_flat or combined).
MetricTensor metric_at(const VaeModel& model, std::span<const double> x, MetricSource source);

}  // namespace pullback
