#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "pullback/vae.hpp"

namespace pullback {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: 8-byte magic "PBVAECKP", u32 version, u32 likelihood, f64 beta,
// u32 network count, then per network its input dimension and layer
// descriptors (kind, in, out), the little-endian f64 parameter blob of each
// network (affine weights and biases, then frozen-norm scale and shift) and a
// trailing FNV-1a 64 checksum over everything before it.
std::string serialize_checkpoint(const VaeModel& model);
VaeModel deserialize_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_checkpoint(const std::filesystem::path& path);

// Recovers the layer plan of a model (hidden widths, latent size, flags).
Architecture architecture_of(const VaeModel& model);

// FormatError unless the checkpoint matches the expected plan and input size.
void require_architecture(const VaeModel& model, const Architecture& expected, std::size_t input_dim);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace pullback
