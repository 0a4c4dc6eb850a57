#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pullback/data.hpp"
#include "pullback/geometry.hpp"
#include "pullback/linalg.hpp"
#include "pullback/vae.hpp"

namespace pullback {

struct RobustnessScore {
    double spectral_radius = 0.0;
    double vn_entropy_normalized = 0.0;  // nats
    double vn_entropy_raw = 0.0;         // nats
    std::size_t rank = 0;
    bool degenerate = false;             // all retained eigenvalues were zero
};

// max |λ|. Throws InvalidArgument on an empty spectrum.
double spectral_radius(const EigenDecomposition& eig);

// Shannon entropy of the spectrum. Normalized mode uses p_k = λ_k/Σλ; raw mode
// evaluates −Σ λ_k ln λ_k literally. Eigenvalues below 1e-10·λ_max are
// ignored in both modes; an all-zero spectrum yields 0.
double von_neumann_entropy(const EigenDecomposition& eig, bool normalized = true);

RobustnessScore score_spectrum(const EigenDecomposition& eig);
RobustnessScore score_metric(const MetricTensor& metric);

// (1/N)·Σ(x_i − x̂_i)²
double reconstruction_mse(std::span<const double> x, std::span<const double> x_hat);

struct SummaryStat {
    double mean = 0.0;
    double stddev = 0.0;  // population standard deviation
};

SummaryStat summarize(std::span<const double> values);

struct ScoreRow {
    std::size_t sample_id = 0;
    RobustnessScore score;
};

struct ScoreFailure {
    std::size_t sample_id = 0;
    std::string message;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
    std::vector<ScoreFailure> failures;
    SummaryStat spectral_radius;
    SummaryStat vn_entropy_normalized;
    SummaryStat vn_entropy_raw;
};

// Scores every sample; per-sample numerical failures are recorded and
// skipped. Work is split across `workers` threads and merged in sample order.
ScoreTable score_dataset(const VaeModel& model, const Dataset& data, MetricSource source,
                         std::size_t workers = 1);

}  // namespace pullback
