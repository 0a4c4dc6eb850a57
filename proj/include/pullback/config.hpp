#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pullback/attacks.hpp"
#include "pullback/data.hpp"
#include "pullback/geometry.hpp"
#include "pullback/vae.hpp"

namespace pullback {

// Flat "section.key" → value map read from an INI-like text:
//
//   # comment
//   [train]
//   epochs = 30
//
// Keys before any section header are top-level. Malformed lines raise
// ParseError with the 1-based line number.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(std::string_view text, const std::string& source = "<memory>");
ConfigMap read_config_file(const std::filesystem::path& path);

struct Grid {
    std::size_t count = 1;
    double min = 0.0;
    double max = 1.0;
    bool log_spaced = true;

    // count ≥ 1, min < max, min > 0 when log-spaced; InvalidArgument otherwise.
    void validate(const char* name) const;
    // Endpoints included; a single-point grid is {min}.
    std::vector<double> values() const;
};

struct DataSpec {
    // "noisy-circle", "two-blobs", "linear-subspace" or "idx".
    std::string kind = "noisy-circle";
    std::size_t n = 2000;
    std::size_t test_n = 200;
    std::size_t ambient_dim = 32;
    double noise_std = 0.2;
    double radius = 4.0;
    std::uint64_t seed = 7;
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    std::optional<std::size_t> limit;
    std::optional<std::size_t> test_limit;

    bool is_idx() const { return kind == "idx"; }
};

struct ExperimentConfig {
    DataSpec data;
    std::string profile = "small";
    // "auto" picks gaussian for synthetic data and bernoulli for IDX images.
    std::string likelihood = "auto";
    bool normalization = false;
    bool decoder_sigma = false;
    TrainConfig train;
    Grid beta_grid{5, 0.01, 10.0, true};
    Grid delta_grid{10, 0.01, 10.0, true};
    std::size_t eigen_directions = 5;
    AttackMode attack_mode = AttackMode::eigenvalue_scaled;
    MetricSource metric_source = MetricSource::encoder_flat;
    std::vector<std::uint64_t> seeds{1};
    std::vector<double> attack_deltas{kDemoDeltaSmall, kDemoDeltaLarge};
    std::vector<std::size_t> attack_directions{1};
    // Test points used by attack and sweep commands; 0 means the whole split.
    std::size_t eval_samples = 0;
    bool image_grid = false;
    std::filesystem::path output_dir = "out";
    std::size_t jobs = 1;

    Likelihood resolved_likelihood() const;
    Architecture architecture() const;
    // Throws InvalidArgument naming the offending key.
    void validate() const;
    // Switches both grids to the 50-β / 40-δ protocol sizes.
    void apply_paper_scale();
};

// Unknown keys raise ParseError so that typos do not pass silently.
ExperimentConfig config_from_map(const ConfigMap& map, ExperimentConfig base = {});

}  // namespace pullback
