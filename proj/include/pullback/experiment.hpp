#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pullback/config.hpp"
#include "pullback/data.hpp"
#include "pullback/metrics.hpp"
#include "pullback/vae.hpp"

namespace pullback {

struct DataSplits {
    Dataset train;
    Dataset test;
};

// Synthetic splits come from the data seed (training stream 0, test stream 1);
// IDX splits from the configured files. The test split falls back to the
// training images when no test files are given.
DataSplits load_data(const ExperimentConfig& config);

// First eval_samples test points (all when eval_samples is 0).
Dataset evaluation_set(const ExperimentConfig& config, const Dataset& test);

// Initialises from RngState(seed) and trains with the same seed.
TrainResult train_model(const ExperimentConfig& config, const Dataset& train, double beta, std::uint64_t seed);

std::string loss_csv(const std::vector<EpochLoss>& history);

// Each command writes its CSVs into config.output_dir and returns the number of
// recorded per-item failures (0 on a clean run).
struct CommandResult {
    std::vector<std::filesystem::path> files;
    std::size_t failures = 0;
};

// Trains with train.beta and seeds[0]; writes checkpoint.bin and loss.csv.
CommandResult cmd_train(const ExperimentConfig& config);

// attack.csv: sample_id,k,delta,latent_shift,recon_mse_original,
// recon_mse_corrupted,input_perturbation_norm. With image_grid set and a
// square input, also attack_grid.pgm.
CommandResult cmd_attack(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

struct SweepRow {
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::size_t sample_id = 0;
    std::size_t direction_index = 0;
    double delta = 0.0;
    double mse = 0.0;
    double latent_shift = 0.0;
    double spectral_radius = 0.0;
    double vn_entropy = 0.0;
};

struct SweepFailure {
    double beta = 0.0;
    std::uint64_t seed = 0;
    std::string stage;
    std::string message;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepFailure> failures;
};

// Trains one model per (β, seed), scores the evaluation set and steps along
// the top eigendirections over the δ grid. Pairs run on config.jobs threads;
// rows come back in (β, seed) order.
SweepResult run_beta_sweep(const ExperimentConfig& config);
std::string sweep_csv(const SweepResult& result);
std::string sweep_summary_csv(const SweepResult& result);
// sweep.csv, sweep_summary.csv and, when anything failed, sweep_failures.csv.
CommandResult cmd_beta_sweep(const ExperimentConfig& config);

struct LatentDistanceRow {
    double delta = 0.0;
    double mean_shift = 0.0;
    double std_shift = 0.0;
    std::size_t count = 0;
};

// Mean ‖μ(x_c) − μ(x)‖ along the dominant eigendirection, with a leading δ = 0
// row followed by the δ grid.
std::vector<LatentDistanceRow> latent_distance(const ExperimentConfig& config, const VaeModel& model,
                                               const Dataset& data);
CommandResult cmd_latent_distance(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

// scores.csv and score_summary.csv.
CommandResult cmd_score(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

struct ReportOptions {
    std::size_t bins = 30;
    // Generic plots when set: a histogram of `histogram_column`, or a line
    // chart of y_column against x_column.
    std::string histogram_column;
    std::string x_column;
    std::string y_column;
    bool log_x = false;
};

// Recognises the CSVs written by the other commands by their header; anything
// else needs the generic options.
CommandResult cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& output_dir,
                         const ReportOptions& options);

// Creates the directory and checks that a file can be written there; IoError
// otherwise.
void ensure_writable_dir(const std::filesystem::path& dir);

}  // namespace pullback
