#include "pullback/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <thread>

#include "pullback/attacks.hpp"
#include "pullback/checkpoint.hpp"
#include "pullback/csv.hpp"
#include "pullback/errors.hpp"
#include "pullback/geometry.hpp"
#include "pullback/svg.hpp"

namespace pullback {

namespace {

long long as_ll(std::size_t v) { return static_cast<long long>(v); }

std::filesystem::path out_path(const ExperimentConfig& config, const char* name) { return config.output_dir / name; }

VaeModel load_for(const ExperimentConfig& config, const std::filesystem::path& checkpoint, std::size_t input_dim) {
    VaeModel model = load_checkpoint(checkpoint);
    require_architecture(model, config.architecture(), input_dim);
    return model;
}

// Square grayscale image grid, one tile per input; values are clamped to [0,1].
std::string pgm_grid(const std::vector<std::vector<DenseVector>>& rows, std::size_t side) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    const std::size_t w = cols * (side + 1) + 1;
    const std::size_t h = rows.size() * (side + 1) + 1;
    std::string img(w * h, static_cast<char>(255));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            const DenseVector& x = rows[r][c];
            for (std::size_t i = 0; i < side; ++i) {
                for (std::size_t j = 0; j < side; ++j) {
                    const double v = std::clamp(x[i * side + j], 0.0, 1.0);
                    const std::size_t y = r * (side + 1) + 1 + i;
                    const std::size_t xx = c * (side + 1) + 1 + j;
                    img[y * w + xx] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
                }
            }
        }
    }
    return "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n" + img;
}

std::optional<std::size_t> square_side(std::size_t n) {
    const auto s = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
    if (s * s == n) return s;
    return std::nullopt;
}

std::string failures_csv(const std::vector<SweepFailure>& failures) {
    std::vector<std::vector<CsvCell>> rows;
    for (const SweepFailure& f : failures) rows.push_back({f.beta, static_cast<long long>(f.seed), f.stage, f.message});
    return to_csv({"beta", "seed", "stage", "message"}, rows);
}

}  // namespace

void ensure_writable_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    const std::filesystem::path probe = dir / ".write-probe";
    {
        std::ofstream out(probe);
        if (!out) throw IoError("output directory " + dir.string() + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

DataSplits load_data(const ExperimentConfig& config) {
    const DataSpec& d = config.data;
    DataSplits s;
    if (d.is_idx()) {
        const auto labels = [](const std::string& p) {
            return p.empty() ? std::optional<std::filesystem::path>{} : std::optional<std::filesystem::path>{p};
        };
        s.train = load_idx(d.train_images, labels(d.train_labels), d.limit);
        if (d.test_images.empty()) {
            s.test = s.train;
        } else {
            s.test = load_idx(d.test_images, labels(d.test_labels), d.test_limit);
        }
        s.test.split = Split::test;
        if (s.test.input_dim != s.train.input_dim) throw FormatError("train and test images differ in size");
        return s;
    }
    ManifoldSpec spec;
    spec.kind = parse_manifold_kind(d.kind);
    spec.n = d.n;
    spec.ambient_dim = d.ambient_dim;
    spec.noise_std = d.noise_std;
    spec.radius = d.radius;
    spec.seed = d.seed;
    s.train = synth_manifold(spec);
    spec.n = d.test_n;
    spec.stream = 1;
    s.test = synth_manifold(spec);
    return s;
}

Dataset evaluation_set(const ExperimentConfig& config, const Dataset& test) {
    return config.eval_samples == 0 ? test : test.prefix(config.eval_samples);
}

TrainResult train_model(const ExperimentConfig& config, const Dataset& train_set, double beta, std::uint64_t seed) {
    RngState rng(seed);
    VaeModel model = build_vae(config.architecture(), train_set.input_dim, config.resolved_likelihood(), beta, rng);
    TrainConfig tc = config.train;
    tc.beta = beta;
    tc.seed = seed;
    return train(std::move(model), train_set, tc);
}

std::string loss_csv(const std::vector<EpochLoss>& history) {
    std::vector<std::vector<CsvCell>> rows;
    for (const EpochLoss& e : history) rows.push_back({as_ll(e.epoch), e.recon, e.kl, e.mixup, e.total});
    return to_csv({"epoch", "recon", "kl", "mixup", "total"}, rows);
}

CommandResult cmd_train(const ExperimentConfig& config) {
    config.validate();
    ensure_writable_dir(config.output_dir);
    const DataSplits data = load_data(config);
    const TrainResult result = train_model(config, data.train, config.train.beta, config.seeds.front());
    CommandResult out;
    out.files = {out_path(config, "checkpoint.bin"), out_path(config, "loss.csv")};
    save_checkpoint(out.files[0], result.model);
    write_file_atomic(out.files[1], loss_csv(result.history));
    return out;
}

CommandResult cmd_attack(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
    config.validate();
    ensure_writable_dir(config.output_dir);
    const DataSplits data = load_data(config);
    const Dataset eval = evaluation_set(config, data.test);
    const VaeModel model = load_for(config, checkpoint, eval.input_dim);

    CommandResult out;
    std::vector<std::vector<CsvCell>> rows;
    const std::optional<std::size_t> side = square_side(eval.input_dim);
    std::vector<std::vector<DenseVector>> grid;
    constexpr std::size_t kGridSamples = 8;

    for (std::size_t i = 0; i < eval.size(); ++i) {
        const DenseVector& x = eval.samples[i];
        const double mse0 = reconstruction_mse(x, reconstruct(model, x));
        std::vector<DenseVector> tiles;
        try {
            const MetricTensor metric = metric_at(model, x, config.metric_source);
            if (config.image_grid && side && i < kGridSamples) tiles = {x, reconstruct(model, x)};
            for (std::size_t k : config.attack_directions) {
                for (double delta : config.attack_deltas) {
                    const AttackResult r = eigen_step(model, x, metric, delta, k, config.attack_mode);
                    rows.push_back({as_ll(i), as_ll(k), delta, r.latent_shift, mse0, r.recon_mse,
                                    norm2(subtract(r.x_corrupted, x))});
                    if (!tiles.empty() && k == config.attack_directions.front()) {
                        tiles.push_back(r.x_corrupted);
                        tiles.push_back(reconstruct(model, r.x_corrupted));
                    }
                }
            }
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::numerical) throw;
            ++out.failures;
        }
        if (!tiles.empty()) grid.push_back(std::move(tiles));
    }
    out.files.push_back(out_path(config, "attack.csv"));
    write_file_atomic(out.files.back(),
                      to_csv({"sample_id", "k", "delta", "latent_shift", "recon_mse_original", "recon_mse_corrupted",
                              "input_perturbation_norm"},
                             rows));
    if (!grid.empty()) {
        out.files.push_back(out_path(config, "attack_grid.pgm"));
        write_file_atomic(out.files.back(), pgm_grid(grid, *side));
    }
    return out;
}

SweepResult run_beta_sweep(const ExperimentConfig& config) {
    config.validate();
    const DataSplits data = load_data(config);
    const Dataset eval = evaluation_set(config, data.test);
    const std::vector<double> betas = config.beta_grid.values();
    const std::vector<double> deltas = config.delta_grid.values();

    struct Job {
        double beta;
        std::uint64_t seed;
        SweepResult result;
    };
    std::vector<Job> jobs;
    for (double b : betas)
        for (std::uint64_t s : config.seeds) jobs.push_back({b, s, {}});

    const auto run = [&](Job& job) {
        std::optional<TrainResult> trained;
        try {
            trained = train_model(config, data.train, job.beta, job.seed);
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::numerical) throw;
            job.result.failures.push_back({job.beta, job.seed, "train", e.what()});
            return;
        }
        const VaeModel& model = trained->model;
        for (std::size_t i = 0; i < eval.size(); ++i) {
            const DenseVector& x = eval.samples[i];
            try {
                const MetricTensor metric = metric_at(model, x, config.metric_source);
                const RobustnessScore score = score_metric(metric);
                const std::size_t top = std::min(config.eigen_directions, metric.numerical_rank());
                for (std::size_t k = 1; k <= top; ++k) {
                    for (double delta : deltas) {
                        const AttackResult r = eigen_step(model, x, metric, delta, k, config.attack_mode);
                        job.result.rows.push_back({job.beta, job.seed, i, k, delta, r.recon_mse, r.latent_shift,
                                                   score.spectral_radius, score.vn_entropy_normalized});
                    }
                }
                if (top < config.eigen_directions) {
                    job.result.failures.push_back({job.beta, job.seed, "sample " + std::to_string(i),
                                                   "numerical rank " + std::to_string(top) +
                                                       " is below the requested eigen_directions"});
                }
            } catch (const Error& e) {
                if (e.category() != ErrorCategory::numerical) throw;
                job.result.failures.push_back({job.beta, job.seed, "sample " + std::to_string(i), e.what()});
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(config.jobs, 1, jobs.size());
    if (workers == 1) {
        for (Job& j : jobs) run(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t j = next++; j < jobs.size(); j = next++) run(jobs[j]);
                } catch (...) {
                    errors[w] = std::current_exception();
                    next = jobs.size();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    SweepResult merged;
    for (Job& j : jobs) {
        merged.rows.insert(merged.rows.end(), j.result.rows.begin(), j.result.rows.end());
        merged.failures.insert(merged.failures.end(), j.result.failures.begin(), j.result.failures.end());
    }
    return merged;
}

std::string sweep_csv(const SweepResult& result) {
    std::vector<std::vector<CsvCell>> rows;
    rows.reserve(result.rows.size());
    for (const SweepRow& r : result.rows) {
        rows.push_back({r.beta, static_cast<long long>(r.seed), as_ll(r.sample_id), as_ll(r.direction_index), r.delta,
                        r.mse, r.latent_shift, r.spectral_radius, r.vn_entropy});
    }
    return to_csv({"beta", "seed", "sample_id", "direction_index", "delta", "mse", "latent_shift", "spectral_radius",
                   "vn_entropy"},
                  rows);
}

std::string sweep_summary_csv(const SweepResult& result) {
    // One score per (β, seed, sample): take it from the first row of each.
    struct Acc {
        std::vector<double> sr;
        std::vector<double> vn;
        std::map<std::uint64_t, bool> seeds;
    };
    std::map<double, Acc> by_beta;
    std::optional<std::tuple<double, std::uint64_t, std::size_t>> last;
    for (const SweepRow& r : result.rows) {
        const auto key = std::make_tuple(r.beta, r.seed, r.sample_id);
        if (last && *last == key) continue;
        last = key;
        Acc& a = by_beta[r.beta];
        a.sr.push_back(r.spectral_radius);
        a.vn.push_back(r.vn_entropy);
        a.seeds[r.seed] = true;
    }
    std::vector<std::vector<CsvCell>> rows;
    for (const auto& [beta, a] : by_beta) {
        const SummaryStat sr = summarize(a.sr);
        const SummaryStat vn = summarize(a.vn);
        rows.push_back({beta, as_ll(a.seeds.size()), as_ll(a.sr.size()), sr.mean, sr.stddev, vn.mean, vn.stddev});
    }
    return to_csv({"beta", "seeds", "samples", "spectral_radius_mean", "spectral_radius_std", "vn_entropy_mean",
                   "vn_entropy_std"},
                  rows);
}

CommandResult cmd_beta_sweep(const ExperimentConfig& config) {
    config.validate();
    ensure_writable_dir(config.output_dir);
    const SweepResult result = run_beta_sweep(config);
    CommandResult out;
    out.files = {out_path(config, "sweep.csv"), out_path(config, "sweep_summary.csv")};
    write_file_atomic(out.files[0], sweep_csv(result));
    write_file_atomic(out.files[1], sweep_summary_csv(result));
    if (!result.failures.empty()) {
        out.files.push_back(out_path(config, "sweep_failures.csv"));
        write_file_atomic(out.files.back(), failures_csv(result.failures));
    }
    out.failures = result.failures.size();
    return out;
}

std::vector<LatentDistanceRow> latent_distance(const ExperimentConfig& config, const VaeModel& model,
                                               const Dataset& data) {
    std::vector<double> deltas{0.0};
    for (double d : config.delta_grid.values()) deltas.push_back(d);
    std::vector<std::vector<double>> shifts(deltas.size());
    for (const DenseVector& x : data.samples) {
        try {
            const MetricTensor metric = metric_at(model, x, config.metric_source);
            for (std::size_t i = 0; i < deltas.size(); ++i) {
                shifts[i].push_back(eigen_step(model, x, metric, deltas[i], 1, config.attack_mode).latent_shift);
            }
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::numerical) throw;
        }
    }
    std::vector<LatentDistanceRow> rows;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const SummaryStat s = summarize(shifts[i]);
        rows.push_back({deltas[i], s.mean, s.stddev, shifts[i].size()});
    }
    return rows;
}

CommandResult cmd_latent_distance(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
    config.validate();
    ensure_writable_dir(config.output_dir);
    const DataSplits data = load_data(config);
    const Dataset eval = evaluation_set(config, data.test);
    const VaeModel model = load_for(config, checkpoint, eval.input_dim);
    const std::vector<LatentDistanceRow> ld = latent_distance(config, model, eval);
    std::vector<std::vector<CsvCell>> rows;
    for (const LatentDistanceRow& r : ld) rows.push_back({r.delta, r.mean_shift, r.std_shift, as_ll(r.count)});
    CommandResult out;
    out.files = {out_path(config, "latent_distance.csv")};
    write_file_atomic(out.files[0], to_csv({"delta", "mean_shift", "std_shift", "count"}, rows));
    out.failures = eval.size() - ld.front().count;
    return out;
}

CommandResult cmd_score(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
    config.validate();
    ensure_writable_dir(config.output_dir);
    const DataSplits data = load_data(config);
    const Dataset eval = evaluation_set(config, data.test);
    const VaeModel model = load_for(config, checkpoint, eval.input_dim);
    const ScoreTable table = score_dataset(model, eval, config.metric_source, config.jobs);

    std::vector<std::vector<CsvCell>> rows;
    for (const ScoreRow& r : table.rows) {
        rows.push_back({as_ll(r.sample_id), r.score.spectral_radius, r.score.vn_entropy_normalized,
                        r.score.vn_entropy_raw, as_ll(r.score.rank)});
    }
    std::vector<std::vector<CsvCell>> summary{
        {std::string("spectral_radius"), table.spectral_radius.mean, table.spectral_radius.stddev, as_ll(table.rows.size())},
        {std::string("vn_entropy"), table.vn_entropy_normalized.mean, table.vn_entropy_normalized.stddev,
         as_ll(table.rows.size())},
        {std::string("vn_entropy_raw"), table.vn_entropy_raw.mean, table.vn_entropy_raw.stddev, as_ll(table.rows.size())},
    };
    CommandResult out;
    out.files = {out_path(config, "scores.csv"), out_path(config, "score_summary.csv")};
    write_file_atomic(out.files[0], to_csv({"sample_id", "spectral_radius", "vn_entropy", "vn_entropy_raw", "rank"}, rows));
    write_file_atomic(out.files[1], to_csv({"metric", "mean", "std", "count"}, summary));
    out.failures = table.failures.size();
    return out;
}

namespace {

// Mean of y grouped by x (sorted), optionally restricted to rows where a
// grouping column equals `group`.
Series grouped_mean(const CsvTable& t, const std::string& x_col, const std::string& y_col, const std::string& name,
                    const std::string& group_col = {}, double group = 0.0) {
    const std::vector<double> xs = t.numeric_column(x_col);
    const std::vector<double> ys = t.numeric_column(y_col);
    std::vector<double> gs;
    if (!group_col.empty()) gs = t.numeric_column(group_col);
    std::map<double, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!gs.empty() && gs[i] != group) continue;
        auto& a = acc[xs[i]];
        a.first += ys[i];
        a.second++;
    }
    Series s{name, {}, {}};
    for (const auto& [x, a] : acc) {
        s.x.push_back(x);
        s.y.push_back(a.first / static_cast<double>(a.second));
    }
    return s;
}

std::vector<double> distinct(const std::vector<double>& v) {
    std::vector<double> out(v);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

CommandResult cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output_dir,
                         const ReportOptions& options) {
    if (inputs.empty()) throw InvalidArgument("report: no input CSVs given");
    if (options.bins == 0) throw InvalidArgument("report: bins must be at least 1");
    ensure_writable_dir(output_dir);
    CommandResult out;
    const auto emit = [&](const std::filesystem::path& in, const std::string& suffix, const std::string& svg) {
        out.files.push_back(output_dir / (in.stem().string() + "_" + suffix + ".svg"));
        write_file_atomic(out.files.back(), svg);
    };
    const auto hist = [&](const std::filesystem::path& in, const CsvTable& t, const std::string& col,
                          const std::string& title, const std::string& suffix) {
        const std::vector<double> v = t.numeric_column(col);
        emit(in, suffix, histogram_svg({title, col, "count"}, v, options.bins));
    };

    for (const auto& in : inputs) {
        const CsvTable t = read_csv(in);
        if (!options.histogram_column.empty()) {
            hist(in, t, options.histogram_column, options.histogram_column, "hist_" + options.histogram_column);
            continue;
        }
        if (!options.x_column.empty() || !options.y_column.empty()) {
            if (options.x_column.empty() || options.y_column.empty()) {
                throw InvalidArgument("report: a line chart needs both --x and --y");
            }
            Series s{options.y_column, t.numeric_column(options.x_column), t.numeric_column(options.y_column)};
            emit(in, options.y_column + "_vs_" + options.x_column,
                 line_chart_svg({options.y_column + " vs " + options.x_column, options.x_column, options.y_column}, {s},
                                options.log_x));
            continue;
        }

        if (t.has_column("epoch") && t.has_column("total")) {
            std::vector<Series> series;
            for (const char* c : {"recon", "kl", "mixup", "total"}) {
                if (t.has_column(c)) series.push_back({c, t.numeric_column("epoch"), t.numeric_column(c)});
            }
            emit(in, "loss", line_chart_svg({"Training loss", "epoch", "loss"}, series));
        } else if (t.has_column("recon_mse_corrupted")) {
            std::vector<Series> series;
            for (double k : distinct(t.numeric_column("k"))) {
                series.push_back(grouped_mean(t, "delta", "recon_mse_corrupted", "k=" + format_double(k), "k", k));
            }
            emit(in, "mse_vs_delta", line_chart_svg({"Corrupted reconstruction MSE", "delta", "mean MSE"}, series));
            hist(in, t, "latent_shift", "Latent shift", "latent_shift_hist");
        } else if (t.has_column("mean_shift")) {
            Series s{"mean", t.numeric_column("delta"), t.numeric_column("mean_shift")};
            emit(in, "latent_distance", line_chart_svg({"Latent shift along the top eigendirection", "delta",
                                                        "mean latent shift"},
                                                       {s}));
        } else if (t.has_column("direction_index") && t.has_column("beta")) {
            const std::vector<double> betas = distinct(t.numeric_column("beta"));
            const std::vector<double> beta_col = t.numeric_column("beta");
            const std::vector<double> dir = t.numeric_column("direction_index");
            const std::vector<double> delta = t.numeric_column("delta");
            const std::vector<double> sr = t.numeric_column("spectral_radius");
            const std::vector<double> vn = t.numeric_column("vn_entropy");
            const double first_delta = delta.empty() ? 0.0 : *std::min_element(delta.begin(), delta.end());
            std::vector<Series> mse_series;
            Series sr_line{"spectral radius", {}, {}};
            Series vn_line{"VN entropy", {}, {}};
            for (std::size_t b = 0; b < betas.size(); ++b) {
                std::vector<double> sr_b;
                std::vector<double> vn_b;
                for (std::size_t i = 0; i < beta_col.size(); ++i) {
                    if (beta_col[i] == betas[b] && dir[i] == 1.0 && delta[i] == first_delta) {
                        sr_b.push_back(sr[i]);
                        vn_b.push_back(vn[i]);
                    }
                }
                const std::string tag = "beta" + std::to_string(b + 1);
                const std::string label = "beta=" + format_double(betas[b]);
                emit(in, tag + "_spectral_radius",
                     histogram_svg({"Spectral radius, " + label, "spectral radius", "count"}, sr_b, options.bins));
                emit(in, tag + "_vn_entropy",
                     histogram_svg({"Von Neumann entropy, " + label, "entropy", "count"}, vn_b, options.bins));
                sr_line.x.push_back(betas[b]);
                sr_line.y.push_back(summarize(sr_b).mean);
                vn_line.x.push_back(betas[b]);
                vn_line.y.push_back(summarize(vn_b).mean);
                mse_series.push_back(grouped_mean(t, "delta", "mse", label, "beta", betas[b]));
            }
            emit(in, "spectral_radius_vs_beta", line_chart_svg({"Mean spectral radius", "beta", "mean"}, {sr_line}, true));
            emit(in, "vn_entropy_vs_beta", line_chart_svg({"Mean Von Neumann entropy", "beta", "mean"}, {vn_line}, true));
            emit(in, "mse_vs_delta", line_chart_svg({"Reconstruction MSE under attack", "delta", "mean MSE"}, mse_series,
                                                    true));
        } else if (t.has_column("spectral_radius_mean") && t.has_column("beta")) {
            Series sr{"spectral radius", t.numeric_column("beta"), t.numeric_column("spectral_radius_mean")};
            Series vn{"VN entropy", t.numeric_column("beta"), t.numeric_column("vn_entropy_mean")};
            emit(in, "scores_vs_beta", line_chart_svg({"Mean scores", "beta", "mean"}, {sr, vn}, true));
        } else if (t.has_column("spectral_radius") && t.has_column("vn_entropy")) {
            hist(in, t, "spectral_radius", "Spectral radius", "spectral_radius_hist");
            hist(in, t, "vn_entropy", "Von Neumann entropy", "vn_entropy_hist");
        } else if ((t.has_column("metric") && t.has_column("mean")) || (t.has_column("stage") && t.has_column("message"))) {
            // score_summary.csv and sweep_failures.csv are plain tables; nothing to draw.
            continue;
        } else {
            throw InvalidArgument("report: " + in.string() +
                                  " has an unrecognised header; pass --hist COLUMN or --x/--y COLUMNS");
        }
    }
    return out;
}

}  // namespace pullback
