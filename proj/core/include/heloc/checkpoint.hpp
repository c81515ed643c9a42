#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "heloc/config.hpp"
#include "heloc/hcl.hpp"

namespace heloc {

/// Serialized model state.
///
/// Layout (little-endian):
///   "HELC" | u32 version | u64 header length | JSON header
///   | u32 array count | per array: u32 name length, name, u32 rows, u32 cols,
///     rows·cols float64 values
///
/// The JSON header holds the training configuration, the embedder
/// configuration and the generator state.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  TrainConfig config;
  EmbedderConfig embedder;
  std::string rng_state;
  std::vector<std::pair<std::string, Tensor2>> arrays;

  const Tensor2* find(const std::string& name) const;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(const TrainConfig& cfg, const HclParams& params,
                           const std::string& rng_state);
Checkpoint make_checkpoint(const PretrainResult& result);

/// Rebuilds the params, checking every array against the configured shapes.
/// Throws ShapeError on a missing or mis-shaped array.
HclParams params_from_checkpoint(const Checkpoint& ckpt);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
/// Throws FormatError for a bad magic, truncated data or an unsupported
/// version, and ShapeError when the embedder disagrees with the config.
Checkpoint read_checkpoint(std::istream& in);

/// Writes through a temporary file renamed into place.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace heloc
