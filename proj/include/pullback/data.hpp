#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pullback/linalg.hpp"

namespace pullback {

enum class Split { train, test };

struct Dataset {
    std::vector<DenseVector> samples;
    std::vector<int> labels;  // empty when unlabeled
    std::size_t input_dim = 0;
    std::string name;
    Split split = Split::train;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    // Checks equal sample lengths and finite values; throws ShapeError/DomainError.
    void validate() const;
    // First n samples (all if n ≥ size).
    Dataset prefix(std::size_t n) const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;  // 2051
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;  // 2049

// Reads an IDX3 unsigned-byte image file (and optional IDX1 label file).
// Pixels are scaled by 1/255 and flattened row-major.
Dataset load_idx(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels = {},
                 std::optional<std::size_t> limit = {});

// Writes an IDX3 image file from [0,1]-valued samples (rounded to bytes).
void write_idx_images(const std::filesystem::path& path, const std::vector<DenseVector>& samples,
                      std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels);

enum class ManifoldKind { noisy_circle, two_blobs, linear_subspace };

ManifoldKind parse_manifold_kind(const std::string& name);
const char* to_string(ManifoldKind kind);

struct ManifoldSpec {
    ManifoldKind kind = ManifoldKind::noisy_circle;
    std::size_t n = 0;
    std::size_t ambient_dim = 0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    // Sample stream under the same frame; 0 is the training split, any other
    // value an independent held-out split.
    std::uint64_t stream = 0;
    // Blob centers sit at ±separation·e₁.
    double separation = 2.0;
    // Circle radius and subspace coordinate scale; noise is added afterwards.
    double radius = 1.0;
};

// Synthetic data. The noisy circle and the subspace live in the span of a
// random orthonormal frame drawn from the seed.
Dataset synth_manifold(const ManifoldSpec& spec);

// The orthonormal frame (ambient_dim × 2) used by synth_manifold for `seed`.
DenseMatrix manifold_frame(std::size_t ambient_dim, std::uint64_t seed);

}  // namespace pullback
