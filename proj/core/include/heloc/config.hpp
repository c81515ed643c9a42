#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "heloc/ast.hpp"
#include "heloc/embedding.hpp"
#include "heloc/rsgnn.hpp"

namespace heloc {

/// Everything that shapes a pretraining run. Defaults are the full-scale
/// settings; desk() is the small profile used for local runs and tests.
struct TrainConfig {
  std::size_t dim = 768;
  std::size_t layers = 4;
  std::size_t max_depth = 30;
  std::size_t max_paths = 200;
  std::size_t max_nodes = 1000;
  double lr = 1e-4;
  std::size_t batch_size = 2048;
  std::size_t steps = 1000;
  double margin = 1.0;
  std::uint64_t seed = 0;
  /// Triples drawn per tree per step: min(node count, this).
  std::size_t triplets_per_graph = 1000;
  Activation activation = Activation::relu;
  std::vector<std::size_t> ngram_sizes{3, 4};
  std::uint64_t hash_seed = 0;
  bool no_nep = false;
  bool no_nro = false;
  bool no_self_attention = false;
  bool no_residual = false;

  static TrainConfig desk();

  /// Number of level classes predicted by the level head.
  std::size_t classes() const noexcept { return max_depth + 1; }
  TreeCaps caps() const { return {max_depth, max_paths, max_nodes}; }
  EmbedderConfig embedder() const { return {dim, ngram_sizes, hash_seed}; }
  EncoderOptions encoder_options() const;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

/// Sets one field from its textual form. Keys are the field names above;
/// booleans accept true/false/1/0, ngram_sizes a comma list, activation
/// identity|relu|tanh. Throws DomainError for unknown keys or bad values.
void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value);

/// Field name → textual value for every field, in declaration order.
std::vector<std::pair<std::string, std::string>> describe(const TrainConfig& cfg);

std::string to_string(Activation act);
Activation parse_activation(std::string_view name);

}  // namespace heloc
