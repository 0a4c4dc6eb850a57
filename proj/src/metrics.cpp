#include "pullback/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

constexpr double kEntropyCutoff = 1e-10;

// Eigenvalues that take part in the entropy: positive and above the cutoff.
std::vector<double> retained(const EigenDecomposition& eig) {
    double largest = 0.0;
    for (double v : eig.values) largest = std::max(largest, v);
    std::vector<double> out;
    if (largest <= 0.0) return out;
    for (double v : eig.values)
        if (v > kEntropyCutoff * largest) out.push_back(v);
    return out;
}

}  // namespace

double spectral_radius(const EigenDecomposition& eig) {
    if (eig.values.empty()) throw InvalidArgument("spectral_radius: empty spectrum");
    double r = 0.0;
    for (double v : eig.values) r = std::max(r, std::abs(v));
    return r;
}

double von_neumann_entropy(const EigenDecomposition& eig, bool normalized) {
    if (eig.values.empty()) throw InvalidArgument("von_neumann_entropy: empty spectrum");
    const std::vector<double> values = retained(eig);
    if (values.empty()) return 0.0;
    double s = 0.0;
    if (normalized) {
        double total = 0.0;
        for (double v : values) total += v;
        for (double v : values) {
            const double p = v / total;
            s -= p * std::log(p);
        }
        return std::max(0.0, s);
    }
    for (double v : values) s -= v * std::log(v);
    return s;
}

RobustnessScore score_spectrum(const EigenDecomposition& eig) {
    RobustnessScore score;
    score.spectral_radius = spectral_radius(eig);
    score.rank = retained(eig).size();
    score.degenerate = score.rank == 0;
    score.vn_entropy_normalized = von_neumann_entropy(eig, true);
    score.vn_entropy_raw = von_neumann_entropy(eig, false);
    return score;
}

RobustnessScore score_metric(const MetricTensor& metric) { return score_spectrum(metric.eigen()); }

double reconstruction_mse(std::span<const double> x, std::span<const double> x_hat) {
    if (x.size() != x_hat.size()) throw ShapeError("reconstruction_mse: length mismatch");
    if (x.empty()) throw ShapeError("reconstruction_mse: empty vectors");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

SummaryStat summarize(std::span<const double> values) {
    SummaryStat st;
    if (values.empty()) return st;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - st.mean) * (v - st.mean);
    st.stddev = std::sqrt(ss / n);
    return st;
}

ScoreTable score_dataset(const VaeModel& model, const Dataset& data, MetricSource source, std::size_t workers) {
    if (data.empty()) throw InvalidArgument("score_dataset: dataset is empty");
    if (data.input_dim != model.input_dim()) throw ShapeError("score_dataset: dataset dimension does not match model");

    struct Outcome {
        std::optional<RobustnessScore> score;
        std::string error;
    };
    std::vector<Outcome> outcomes(data.size());
    const auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                outcomes[i].score = score_metric(metric_at(model, data.samples[i], source));
            } catch (const Error& e) {
                outcomes[i].error = e.what();
            }
        }
    };

    workers = std::clamp<std::size_t>(workers, 1, data.size());
    if (workers == 1) {
        run(0, data.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (data.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(data.size(), begin + chunk);
            if (begin < end) pool.emplace_back(run, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    ScoreTable table;
    std::vector<double> sr;
    std::vector<double> vn;
    std::vector<double> raw;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].score) {
            table.failures.push_back({i, outcomes[i].error});
            continue;
        }
        const RobustnessScore& s = *outcomes[i].score;
        table.rows.push_back({i, s});
        sr.push_back(s.spectral_radius);
        vn.push_back(s.vn_entropy_normalized);
        raw.push_back(s.vn_entropy_raw);
    }
    table.spectral_radius = summarize(sr);
    table.vn_entropy_normalized = summarize(vn);
    table.vn_entropy_raw = summarize(raw);
    return table;
}

}  // namespace pullback
