#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "heloc/ast.hpp"
#include "heloc/tensor.hpp"

namespace heloc {

/// Signed feature hashing of character n-grams.
struct EmbedderConfig {
  std::size_t dim = 768;
  std::vector<std::size_t> ngram_sizes{3, 4};
  std::uint64_t hash_seed = 0;

  bool operator==(const EmbedderConfig&) const = default;
};

void validate(const EmbedderConfig& cfg);

/// Hashes every n-gram of the boundary-marked string into one of cfg.dim
/// buckets with a ±1 sign, then L2-normalizes. The empty string maps to zero.
std::vector<double> embed_text(std::string_view s, const EmbedderConfig& cfg);

/// `type|text|start:end`
std::string node_string(const AstNode& node);

/// Row i embeds node i's string.
Tensor2 node_features(const AstGraph& graph, const EmbedderConfig& cfg);

/// Row j embeds the node strings of path j joined by '/'.
Tensor2 path_features(const AstGraph& graph, const EmbedderConfig& cfg);

/// Adds to each node row the mean of the rows of the paths passing through it.
/// Nodes whose paths were all dropped by the path cap keep their node row.
Tensor2 augment(const Tensor2& x0_node, const Tensor2& x0_path, const AstGraph& graph);

struct InputPack {
  Tensor2 x0_node;
  Tensor2 x0_path;
  Tensor2 x0_ast;
};

InputPack make_inputs(const AstGraph& graph, const EmbedderConfig& cfg);

}  // namespace heloc
