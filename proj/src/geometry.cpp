#include "pullback/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

constexpr double kRankCutoff = 1e-10;

double logistic(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

void scale_rows(DenseMatrix& m, std::span<const double> s) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (double& v : m.row(r)) v *= s[r];
}

// d_z-row factor B with BᵀB = G_z, from the eigendecomposition of G_z.
DenseMatrix square_root_factor(const MetricTensor& g_z) {
    const EigenDecomposition& eig = g_z.eigen();
    const std::size_t n = g_z.dimension();
    DenseMatrix b(n, n);
    for (std::size_t k = 0; k < eig.vector_count(); ++k) {
        const double root = std::sqrt(eig.values[k]);
        for (std::size_t c = 0; c < n; ++c) b(k, c) = root * eig.vectors(c, k);
    }
    return b;
}

}  // namespace

const char* to_string(MetricSource source) {
    switch (source) {
        case MetricSource::encoder_flat: return "encoder-flat";
        case MetricSource::encoder_decoder_combined: return "encoder-decoder-combined";
        case MetricSource::decoder: return "decoder";
        case MetricSource::estimate: return "estimate";
    }
    return "unknown";
}

MetricSource parse_metric_source(const std::string& name) {
    if (name == "encoder" || name == "encoder-flat") return MetricSource::encoder_flat;
    if (name == "combined" || name == "encoder-decoder-combined") return MetricSource::encoder_decoder_combined;
    throw InvalidArgument("unknown metric source '" + name + "' (expected encoder or combined)");
}

MetricTensor MetricTensor::from_factor(DenseMatrix factor, MetricSource source) {
    if (!factor.all_finite()) throw InvalidArgument("MetricTensor: non-finite factor");
    MetricTensor g;
    g.factor_ = std::move(factor);
    g.source_ = source;
    return g;
}

MetricTensor MetricTensor::from_dense(DenseMatrix matrix, MetricSource source) {
    if (matrix.rows() != matrix.cols()) throw ShapeError("MetricTensor: dense metric must be square");
    if (!matrix.all_finite()) throw InvalidArgument("MetricTensor: non-finite entries");
    MetricTensor g;
    g.dense_ = std::move(matrix);
    g.source_ = source;
    return g;
}

std::size_t MetricTensor::dimension() const noexcept { return factor_ ? factor_->cols() : dense_->cols(); }

const DenseMatrix& MetricTensor::factor() const {
    if (!factor_) throw ContractError("MetricTensor: metric is not held in factored form");
    return *factor_;
}

DenseMatrix MetricTensor::dense() const { return factor_ ? gram_cols(*factor_) : *dense_; }

const EigenDecomposition& MetricTensor::eigen() const {
    if (!eig_) {
        EigenDecomposition eig;
        if (factor_ && factor_->rows() <= factor_->cols()) {
            eig = gram_eig(*factor_);
        } else {
            eig = sym_eig(dense());
            clamp_psd(eig);
        }
        eig_ = std::move(eig);
    }
    return *eig_;
}

std::size_t MetricTensor::numerical_rank() const {
    const auto& values = eigen().values;
    if (values.empty() || values.front() <= 0.0) return 0;
    const double cutoff = kRankCutoff * values.front();
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [&](double v) { return v > cutoff; }));
}

JacobianPair encoder_jacobians(const VaeModel& model, std::span<const double> x) {
    const DenseVector h = model.encoder_trunk.evaluate(x);
    const DenseMatrix j_trunk = model.encoder_trunk.input_jacobian(x);
    JacobianPair jp;
    jp.j_mu = matmul(model.mu_head.input_jacobian(h), j_trunk);
    jp.j_sigma = matmul(model.logsigma_head.input_jacobian(h), j_trunk);
    const DenseVector raw = model.logsigma_head.evaluate(h);
    DenseVector scale(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        const bool clamped = raw[k] < kLogSigmaMin || raw[k] > kLogSigmaMax;
        scale[k] = clamped ? 0.0 : std::exp(raw[k]);
    }
    scale_rows(jp.j_sigma, scale);
    return jp;
}

MetricTensor pullback_metric(const JacobianPair& jp) {
    if (jp.j_mu.rows() != jp.j_sigma.rows() || jp.j_mu.cols() != jp.j_sigma.cols()) {
        throw ShapeError("pullback_metric: J_mu and J_sigma shapes differ");
    }
    return MetricTensor::from_factor(vstack(jp.j_mu, jp.j_sigma), MetricSource::encoder_flat);
}

DenseMatrix sampled_pullback(const JacobianPair& jp, std::span<const double> epsilon) {
    if (epsilon.size() != jp.j_mu.rows()) throw ShapeError("sampled_pullback: epsilon length must equal d_z");
    DenseMatrix j = jp.j_mu;
    for (std::size_t k = 0; k < j.rows(); ++k) {
        auto row = j.row(k);
        auto srow = jp.j_sigma.row(k);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += epsilon[k] * srow[c];
    }
    return gram_cols(j);
}

MetricTensor expected_metric_mc(const JacobianPair& jp, std::size_t k, RngState& rng) {
    if (k == 0) throw InvalidArgument("expected_metric_mc: sample count must be at least 1");
    const std::size_t n = jp.j_mu.cols();
    DenseMatrix sum(n, n);
    for (std::size_t s = 0; s < k; ++s) {
        const DenseVector eps = sample_std_normal(rng, jp.j_mu.rows());
        sum += sampled_pullback(jp, eps);
    }
    sum *= 1.0 / static_cast<double>(k);
    return MetricTensor::from_dense(std::move(sum), MetricSource::estimate);
}

MetricTensor expected_metric_mc(const VaeModel& model, std::span<const double> x, std::size_t k, RngState& rng) {
    return expected_metric_mc(encoder_jacobians(model, x), k, rng);
}

DecoderJacobians decoder_jacobians(const VaeModel& model, std::span<const double> z) {
    DecoderJacobians dj;
    dj.j_mu = model.decoder.input_jacobian(z);
    if (model.likelihood == Likelihood::bernoulli) {
        const DenseVector logits = model.decoder.evaluate(z);
        DenseVector d(logits.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double p = logistic(logits[i]);
            d[i] = p * (1.0 - p);
        }
        scale_rows(dj.j_mu, d);
    }
    if (model.decoder_logsigma) {
        DenseMatrix js = model.decoder_logsigma->input_jacobian(z);
        const DenseVector raw = model.decoder_logsigma->evaluate(z);
        DenseVector scale(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const bool clamped = raw[i] < kLogSigmaMin || raw[i] > kLogSigmaMax;
            scale[i] = clamped ? 0.0 : std::exp(raw[i]);
        }
        scale_rows(js, scale);
        dj.j_sigma = std::move(js);
    }
    return dj;
}

MetricTensor decoder_metric(const VaeModel& model, std::span<const double> z) {
    DecoderJacobians dj = decoder_jacobians(model, z);
    DenseMatrix f = dj.j_sigma ? vstack(dj.j_mu, *dj.j_sigma) : std::move(dj.j_mu);
    return MetricTensor::from_factor(std::move(f), MetricSource::decoder);
}

MetricTensor combined_metric(const VaeModel& model, std::span<const double> x) {
    const JacobianPair jp = encoder_jacobians(model, x);
    const MetricTensor g_z = decoder_metric(model, encode_mean(model, x));
    const DenseMatrix b = square_root_factor(g_z);
    return MetricTensor::from_factor(vstack(matmul(b, jp.j_mu), matmul(b, jp.j_sigma)),
                                     MetricSource::encoder_decoder_combined);
}

DenseMatrix combined_metric_dense(const VaeModel& model, std::span<const double> x) {
    const JacobianPair jp = encoder_jacobians(model, x);
    const DenseMatrix g_z = decoder_metric(model, encode_mean(model, x)).dense();
    DenseMatrix g = matmul_tn(jp.j_mu, matmul(g_z, jp.j_mu));
    g += matmul_tn(jp.j_sigma, matmul(g_z, jp.j_sigma));
    return g;
}

double quadratic_form(const MetricTensor& g, std::span<const double> eta) {
    if (eta.size() != g.dimension()) throw ShapeError("quadratic_form: eta length must equal the metric dimension");
    if (g.is_factored()) return squared_norm(matvec(g.factor(), eta));
    const DenseMatrix d = g.dense();
    return std::max(0.0, dot(eta, matvec(d, eta)));
}

MetricTensor metric_at(const VaeModel& model, std::span<const double> x, MetricSource source) {
    switch (source) {
        case MetricSource::encoder_flat: return pullback_metric(encoder_jacobians(model, x));
        case MetricSource::encoder_decoder_combined: return combined_metric(model, x);
        default: break;
    }
    throw InvalidArgument(std::string("metric_at: unsupported metric source ") + to_string(source));
}

}  // namespace pullback
