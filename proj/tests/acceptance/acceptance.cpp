// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>

#include "oracles.hpp"
#include "pullback/attacks.hpp"
#include "pullback/csv.hpp"
#include "pullback/experiment.hpp"
#include "pullback/metrics.hpp"

using namespace pullback;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

VaeModel random_model(const Architecture& arch, std::size_t n, Likelihood lik, std::uint64_t seed) {
    RngState rng(seed);
    VaeModel m = build_vae(arch, n, lik, 1.0, rng);
    // Move frozen-norm layers off the identity so they take part in the check.
    for (MlpNetwork* net : {&m.encoder_trunk, &m.decoder}) {
        for (std::size_t i = 0; i < net->layers().size(); ++i) {
            if (net->layers()[i].kind != LayerKind::frozen_norm) continue;
            Layer& l = net->layer(i);
            for (double& s : l.scale) s = 0.5 + rng.uniform();
            for (double& s : l.shift) s = 0.1 * rng.normal();
        }
    }
    return m;
}

// Baseline regime shared by the trend criteria.
ExperimentConfig trend_config() {
    ExperimentConfig c;
    c.data.kind = "noisy-circle";
    c.data.n = 2000;
    c.data.test_n = 200;
    c.data.ambient_dim = 32;
    c.data.radius = 4.0;
    c.data.noise_std = 0.2;
    c.data.seed = 7;
    c.profile = "small";
    c.likelihood = "gaussian";
    c.train.epochs = 30;
    c.train.batch_size = 64;
    return c;
}

struct TrendModels {
    DataSplits data;
    std::map<std::pair<double, std::uint64_t>, VaeModel> plain;
    std::map<std::uint64_t, VaeModel> mixup;
};

const std::vector<double> kBetas{0.1, 1.0, 5.0};
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

TrendModels& trend_models() {
    static TrendModels models = [] {
        TrendModels t;
        ExperimentConfig c = trend_config();
        t.data = load_data(c);
        for (double beta : kBetas)
            for (std::uint64_t seed : kSeeds) t.plain.emplace(std::pair{beta, seed}, train_model(c, t.data.train, beta, seed).model);
        c.train.mixup_weight = 1.0;
        for (std::uint64_t seed : kSeeds) t.mixup.emplace(seed, train_model(c, t.data.train, 1.0, seed).model);
        return t;
    }();
    return models;
}

double test_recon_mse(const VaeModel& m, const Dataset& d) {
    double s = 0.0;
    for (const DenseVector& x : d.samples) s += reconstruction_mse(x, decode_mean(m, encode_mean(m, x)));
    return s / static_cast<double>(d.size());
}

Outcome jacobians() {
    const std::vector<Architecture> archs{Architecture::small(), Architecture::paper(), {{12, 9}, 4, true, true}};
    RngState rng(101);
    double worst = 0.0;
    int pairs = 0;
    for (int t = 0; t < 100; ++t) {
        const Architecture& a = archs[t % 3];
        const Likelihood lik = (t % 2 == 0 || a.decoder_sigma) ? Likelihood::gaussian : Likelihood::bernoulli;
        const std::size_t n = t % 3 == 1 ? 40 : 16;
        const VaeModel m = random_model(a, n, lik, 1000 + t);
        const DenseVector x = oracle::random_vector(n, rng);
        const JacobianPair jp = encoder_jacobians(m, x);
        worst = std::max(worst, oracle::rel_frob(jp.j_mu, oracle::fd_jacobian([&](const DenseVector& v) { return oracle::mu_of(m, v); }, x)));
        worst = std::max(worst, oracle::rel_frob(jp.j_sigma, oracle::fd_jacobian([&](const DenseVector& v) { return oracle::sigma_of(m, v); }, x)));
        const DenseVector z = oracle::random_vector(m.latent_dim(), rng);
        const DecoderJacobians dj = decoder_jacobians(m, z);
        worst = std::max(worst, oracle::rel_frob(dj.j_mu, oracle::fd_jacobian([&](const DenseVector& v) { return oracle::decoder_mean_of(m, v); }, z)));
        if (dj.j_sigma) {
            const DenseMatrix fd = oracle::fd_jacobian(
                [&](const DenseVector& v) {
                    DenseVector s = m.decoder_logsigma->evaluate(v);
                    for (double& e : s) e = std::exp(std::clamp(e, kLogSigmaMin, kLogSigmaMax));
                    return s;
                },
                z);
            worst = std::max(worst, oracle::rel_frob(*dj.j_sigma, fd));
        }
        ++pairs;
    }
    return {worst < 1e-4, std::to_string(pairs) + " pairs, worst relative error " + num(worst)};
}

Outcome expectation_oracle() {
    RngState rng(202);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
        const VaeModel m = random_model(Architecture::small(), 16, Likelihood::gaussian, 2000 + t);
        const DenseVector x = oracle::random_vector(16, rng);
        const JacobianPair jp = encoder_jacobians(m, x);
        RngState mc(3000 + t);
        worst = std::max(worst, oracle::rel_frob(expected_metric_mc(jp, 10000, mc).dense(), pullback_metric(jp).dense()));
    }
    return {worst < 0.05, "10 models, K=10000, worst relative error " + num(worst)};
}

Outcome optimality() {
    const TrendModels& t = trend_models();
    const VaeModel& m = t.plain.at({1.0, 1});
    RngState rng(303);
    std::size_t violations = 0;
    double gap = 1e300;
    for (std::size_t i = 0; i < 50; ++i) {
        const MetricTensor g = metric_at(m, t.data.test.samples[i], MetricSource::encoder_flat);
        const AttackResult r = eigen_attack(m, t.data.test.samples[i], g, kDemoDeltaSmall, 1);
        const double top = quadratic_form(g, r.direction);
        for (int k = 0; k < 1000; ++k) {
            const double q = quadratic_form(g, sample_unit_sphere(rng, g.dimension()));
            if (q > top) ++violations;
            gap = std::min(gap, (top - q) / top);
        }
    }
    return {violations == 0, "50 points x 1000 directions, " + std::to_string(violations) +
                                 " violations, smallest relative margin " + num(gap)};
}

Outcome eigensolver() {
    RngState rng(404);
    double worst_res = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.uniform_index(64);
        const DenseMatrix g = oracle::random_psd(n, 1 + rng.uniform_index(n), rng);
        const EigenDecomposition e = sym_eig(g);
        DenseMatrix v(n, n);
        for (std::size_t k = 0; k < e.vector_count(); ++k) {
            const DenseVector col = e.vector(k);
            for (std::size_t i = 0; i < n; ++i) v(i, k) = col[i];
        }
        const DenseMatrix gv = oracle::naive_matmul(g, v);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < e.vector_count(); ++k) {
                const double d = gv(i, k) - v(i, k) * e.values[k];
                s += d * d;
            }
        worst_res = std::max(worst_res, std::sqrt(s) / oracle::frob(g));
    }
    double worst_gram = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.uniform_index(63);
        const std::size_t m = 1 + rng.uniform_index(std::min<std::size_t>(16, n));
        const DenseMatrix f = oracle::random_matrix(m, n, rng);
        const EigenDecomposition a = gram_eig(f);
        const EigenDecomposition b = sym_eig(oracle::naive_matmul(oracle::naive_transpose(f), f));
        for (std::size_t k = 0; k < m; ++k) worst_gram = std::max(worst_gram, std::abs(a.values[k] - b.values[k]));
    }
    return {worst_res < 1e-8 && worst_gram < 1e-8,
            "worst residual " + num(worst_res) + ", worst gram/dense eigenvalue gap " + num(worst_gram)};
}

struct TrendStats {
    std::map<double, double> sr;
    std::map<double, double> vn;
};

TrendStats trend_stats() {
    const TrendModels& t = trend_models();
    TrendStats s;
    for (double beta : kBetas) {
        for (std::uint64_t seed : kSeeds) {
            const ScoreTable table = score_dataset(t.plain.at({beta, seed}), t.data.test, MetricSource::encoder_flat);
            s.sr[beta] += table.spectral_radius.mean / static_cast<double>(kSeeds.size());
            s.vn[beta] += table.vn_entropy_normalized.mean / static_cast<double>(kSeeds.size());
        }
    }
    return s;
}

Outcome beta_trend() {
    const TrendStats s = trend_stats();
    bool sr_down = true, vn_down = true;
    std::string detail;
    for (std::size_t i = 0; i < kBetas.size(); ++i) {
        const double b = kBetas[i];
        detail += "beta " + num(b) + ": SR " + num(s.sr.at(b)) + " VN " + num(s.vn.at(b)) + (i + 1 < kBetas.size() ? "; " : "");
        if (i == 0) continue;
        sr_down = sr_down && s.sr.at(b) < s.sr.at(kBetas[i - 1]);
        vn_down = vn_down && s.vn.at(b) <= s.vn.at(kBetas[i - 1]);
    }
    return {sr_down && vn_down, detail};
}

Outcome attack_trend() {
    const TrendModels& t = trend_models();
    const VaeModel& m = t.plain.at({1.0, 1});
    RngState rng(606);
    double mse_small = 0.0, mse_large = 0.0, ratio = 0.0;
    std::size_t count = 0;
    for (const DenseVector& x : t.data.test.samples) {
        const MetricTensor g = metric_at(m, x, MetricSource::encoder_flat);
        const AttackResult small = eigen_attack(m, x, g, kDemoDeltaSmall, 1);
        const AttackResult large = eigen_attack(m, x, g, kDemoDeltaLarge, 1);
        mse_small += small.recon_mse;
        mse_large += large.recon_mse;
        // Random direction with the same input-space norm as the eigen step.
        const AttackResult random = random_direction_attack(m, x, small.step, rng);
        ratio += small.latent_shift / random.latent_shift;
        ++count;
    }
    const double n = static_cast<double>(count);
    mse_small /= n;
    mse_large /= n;
    ratio /= n;
    return {count >= 100 && mse_large > mse_small && ratio > 1.0,
            std::to_string(count) + " points, MSE " + num(mse_small) + " -> " + num(mse_large) +
                ", eigen/random latent shift ratio " + num(ratio)};
}

Outcome mixup_effect() {
    const TrendModels& t = trend_models();
    double sr_plain = 0.0, sr_mix = 0.0, mse_plain = 0.0, mse_mix = 0.0;
    for (std::uint64_t seed : kSeeds) {
        const VaeModel& p = t.plain.at({1.0, seed});
        const VaeModel& q = t.mixup.at(seed);
        sr_plain += score_dataset(p, t.data.test, MetricSource::encoder_flat).spectral_radius.mean;
        sr_mix += score_dataset(q, t.data.test, MetricSource::encoder_flat).spectral_radius.mean;
        mse_plain += test_recon_mse(p, t.data.test);
        mse_mix += test_recon_mse(q, t.data.test);
    }
    const double k = static_cast<double>(kSeeds.size());
    sr_plain /= k;
    sr_mix /= k;
    mse_plain /= k;
    mse_mix /= k;
    return {sr_mix < sr_plain && mse_mix <= 2.0 * mse_plain,
            "SR " + num(sr_plain) + " -> " + num(sr_mix) + ", test MSE " + num(mse_plain) + " -> " + num(mse_mix)};
}

Outcome pga_sanity() {
    RngState rng(808);
    double worst = 1e300;
    for (int t = 0; t < 5; ++t) {
        const DenseMatrix w = oracle::random_matrix(4, 12, rng);
        const VaeModel m = oracle::linear_vae(w, 0.0, oracle::random_matrix(12, 4, rng));
        const double s1sq = oracle::power_iteration(oracle::naive_matmul(oracle::naive_transpose(w), w));
        const double eta0 = 0.3 + 0.2 * t;
        const AttackResult r = pga_latent_attack(m, oracle::random_vector(12, rng), {eta0, 200, 0.5}, rng);
        worst = std::min(worst, r.latent_shift * r.latent_shift / (eta0 * eta0 * s1sq));
    }
    return {worst >= 0.99, "5 toys, 200 steps, worst fraction of the optimum " + num(worst)};
}

std::map<std::string, std::string> run_pipeline(const fs::path& dir) {
    fs::remove_all(dir);
    ExperimentConfig c;
    c.data.n = 400;
    c.data.test_n = 30;
    c.data.ambient_dim = 16;
    c.train.epochs = 5;
    c.eval_samples = 10;
    c.beta_grid = {3, 0.1, 5.0, true};
    c.delta_grid = {4, 0.01, 1.0, true};
    c.eigen_directions = 3;
    c.seeds = {1, 2};
    c.jobs = 2;
    c.train.mixup_weight = 1.0;
    c.output_dir = dir;
    cmd_train(c);
    const fs::path ckpt = dir / "checkpoint.bin";
    cmd_attack(c, ckpt);
    cmd_score(c, ckpt);
    cmd_latent_distance(c, ckpt);
    cmd_beta_sweep(c);
    std::vector<fs::path> csvs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") csvs.push_back(e.path());
    std::sort(csvs.begin(), csvs.end());
    cmd_report(csvs, dir / "charts", ReportOptions{});
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
    return files;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "pullback_acceptance";
    const auto a = run_pipeline(root / "a");
    const auto b = run_pipeline(root / "b");
    std::size_t csv = 0, other = 0;
    for (const auto& [name, _] : a) (name.ends_with(".csv") ? csv : other)++;
    const bool same = a == b && a.count("checkpoint.bin") == 1 && csv >= 6;
    return {same, std::to_string(csv) + " CSVs and " + std::to_string(other) + " other files, " +
                      (a == b ? "byte-identical" : "differ")};
}

Outcome combined_consistency() {
    RngState rng(1010);
    double worst_id = 0.0, worst_fd = 0.0;
    for (int t = 0; t < 10; ++t) {
        // Nonlinear encoder with N = d_z and an identity decoder.
        VaeModel m = random_model({{10, 7}, 6, t % 2 == 0, false}, 6, Likelihood::gaussian, 4000 + t);
        m.decoder = oracle::affine_net(DenseMatrix::identity(6));
        const DenseVector x = oracle::random_vector(6, rng);
        worst_id = std::max(worst_id, oracle::rel_frob(combined_metric(m, x).dense(), metric_at(m, x, MetricSource::encoder_flat).dense()));
    }
    const std::vector<Architecture> archs{Architecture::small(), {{12, 9}, 4, true, true}, {{5}, 3, false, false}};
    for (int t = 0; t < 20; ++t) {
        const Architecture& a = archs[t % 3];
        const Likelihood lik = (a.decoder_sigma || t % 2 == 0) ? Likelihood::gaussian : Likelihood::bernoulli;
        const VaeModel m = random_model(a, 20, lik, 5000 + t);
        const DenseVector x = oracle::random_vector(20, rng);
        worst_fd = std::max(worst_fd, oracle::rel_frob(combined_metric(m, x).dense(), combined_metric_dense(m, x)));
    }
    return {worst_id <= 1e-10 && worst_fd <= 1e-10,
            "identity-decoder gap " + num(worst_id) + ", dense vs factored gap " + num(worst_fd)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"jacobian correctness", jacobians},
        {"Monte-Carlo metric oracle", expectation_oracle},
        {"eigendirection optimality", optimality},
        {"eigensolver accuracy", eigensolver},
        {"beta trend", beta_trend},
        {"attack severity trend", attack_trend},
        {"mixup effect", mixup_effect},
        {"PGA sanity", pga_sanity},
        {"determinism", determinism},
        {"combined metric consistency", combined_consistency},
    };
    int failed = 0;
    {
        const auto start = std::chrono::steady_clock::now();
        try {
            trend_models();
        } catch (const std::exception& e) {
            std::printf("# shared model training threw: %s\n", e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("# trained %zu shared models for criteria 3, 5, 6 and 7 in %.1fs\n",
                    kBetas.size() * kSeeds.size() + kSeeds.size(), secs);
    }
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %zu %s: %s (%s; %.1fs)\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
