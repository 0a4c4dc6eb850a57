#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pullback/errors.hpp"
#include "pullback/experiment.hpp"

namespace {

using namespace pullback;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    bool paper_scale = false;
    std::optional<std::string> metric_source;
    std::optional<std::string> attack_mode;
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> eval_samples;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "experiment config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "run a single seed");
    cmd->add_option("--output-dir", f.output_dir, "where CSVs and checkpoints go");
    cmd->add_flag("--paper-scale", f.paper_scale, "50 betas and 40 step sizes");
    cmd->add_option("--metric-source", f.metric_source, "encoder | combined")
        ->check(CLI::IsMember({"encoder", "combined"}));
    cmd->add_option("--attack-mode", f.attack_mode, "scaled | unit")->check(CLI::IsMember({"scaled", "unit"}));
    cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--eval-samples", f.eval_samples, "test points to evaluate (0 = all)");
}

ExperimentConfig resolve(const CommonFlags& f) {
    ExperimentConfig c;
    if (!f.config_path.empty()) c = config_from_map(read_config_file(f.config_path));
    if (f.paper_scale) c.apply_paper_scale();
    if (f.seed) c.seeds = {*f.seed};
    if (f.output_dir) c.output_dir = *f.output_dir;
    if (f.metric_source) c.metric_source = parse_metric_source(*f.metric_source);
    if (f.attack_mode) c.attack_mode = parse_attack_mode(*f.attack_mode);
    if (f.jobs) c.jobs = *f.jobs;
    if (f.eval_samples) c.eval_samples = *f.eval_samples;
    return c;
}

int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::usage: return 1;
        case ErrorCategory::data: return 2;
        case ErrorCategory::numerical: return 3;
    }
    return 1;
}

int finish(const CommandResult& r) {
    for (const auto& p : r.files) std::cout << "wrote " << p.string() << "\n";
    if (r.failures > 0) {
        std::cerr << r.failures << " item(s) failed; see the output files\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pullback: beta-VAE training, pullback-metric attacks and robustness scores"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::filesystem::path checkpoint;
    std::optional<double> beta;
    std::optional<std::size_t> epochs;
    std::optional<double> mixup_weight;
    std::vector<double> deltas;
    std::vector<std::size_t> directions;
    bool image_grid = false;

    auto* train = app.add_subcommand("train", "train a model, write checkpoint.bin and loss.csv");
    add_common(train, flags);
    train->add_option("--beta", beta, "KL weight");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--mixup-weight", mixup_weight, "weight of the mixup penalty");

    const auto add_checkpoint = [&](CLI::App* cmd) {
        cmd->add_option("--checkpoint", checkpoint, "model file (default OUTPUT_DIR/checkpoint.bin)");
    };
    auto* attack = app.add_subcommand("attack", "one-step eigendirection attack, attack.csv");
    add_common(attack, flags);
    add_checkpoint(attack);
    attack->add_option("--delta", deltas, "step sizes");
    attack->add_option("-k,--direction", directions, "1-based eigendirection indices");
    attack->add_flag("--image-grid", image_grid, "also write attack_grid.pgm for square inputs");

    auto* sweep = app.add_subcommand("beta-sweep", "train and score over the beta grid, sweep.csv");
    add_common(sweep, flags);

    auto* latent = app.add_subcommand("latent-distance", "latent shift against step size, latent_distance.csv");
    add_common(latent, flags);
    add_checkpoint(latent);

    auto* score = app.add_subcommand("score", "spectral radius and entropy per test point, scores.csv");
    add_common(score, flags);
    add_checkpoint(score);

    std::vector<std::filesystem::path> report_inputs;
    std::filesystem::path report_dir = "out";
    ReportOptions report_opts;
    auto* report = app.add_subcommand("report", "render CSVs as SVG charts");
    report->add_option("inputs", report_inputs, "CSV files")->required()->check(CLI::ExistingFile);
    report->add_option("--output-dir", report_dir, "where SVGs go");
    report->add_option("--bins", report_opts.bins, "histogram bins")->check(CLI::PositiveNumber);
    report->add_option("--hist", report_opts.histogram_column, "histogram of one column");
    report->add_option("--x", report_opts.x_column, "x column of a line chart");
    report->add_option("--y", report_opts.y_column, "y column of a line chart");
    report->add_flag("--log-x", report_opts.log_x, "logarithmic x axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (report->parsed()) return finish(cmd_report(report_inputs, report_dir, report_opts));

        ExperimentConfig config = resolve(flags);
        if (beta) config.train.beta = *beta;
        if (epochs) config.train.epochs = *epochs;
        if (mixup_weight) config.train.mixup_weight = *mixup_weight;
        if (!deltas.empty()) config.attack_deltas = deltas;
        if (!directions.empty()) config.attack_directions = directions;
        if (image_grid) config.image_grid = true;
        if (checkpoint.empty()) checkpoint = config.output_dir / "checkpoint.bin";

        if (train->parsed()) return finish(cmd_train(config));
        if (attack->parsed()) return finish(cmd_attack(config, checkpoint));
        if (sweep->parsed()) return finish(cmd_beta_sweep(config));
        if (latent->parsed()) return finish(cmd_latent_distance(config, checkpoint));
        if (score->parsed()) return finish(cmd_score(config, checkpoint));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 3;
    }
    return 1;
}
