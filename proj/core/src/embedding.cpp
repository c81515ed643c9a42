#include "heloc/embedding.hpp"

#include <cmath>

#include "heloc/error.hpp"

namespace heloc {
namespace {

constexpr char kBegin = '\x02';
constexpr char kEnd = '\x03';

std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) {
  // FNV-1a followed by a splitmix64 finalizer.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

}  // namespace

void validate(const EmbedderConfig& cfg) {
  if (cfg.dim < 2) throw DomainError("embedding dimension must be at least 2");
  if (cfg.ngram_sizes.empty()) throw DomainError("at least one n-gram size is required");
  for (std::size_t n : cfg.ngram_sizes)
    if (n == 0) throw DomainError("n-gram sizes must be positive");
}

std::vector<double> embed_text(std::string_view s, const EmbedderConfig& cfg) {
  validate(cfg);
  std::vector<double> v(cfg.dim, 0.0);
  if (s.empty()) return v;
  std::string marked;
  marked.reserve(s.size() + 2);
  marked.push_back(kBegin);
  marked.append(s);
  marked.push_back(kEnd);
  const std::string_view view(marked);
  for (const std::size_t n : cfg.ngram_sizes) {
    if (n > view.size()) continue;
    for (std::size_t i = 0; i + n <= view.size(); ++i) {
      const std::uint64_t h = hash_bytes(view.substr(i, n), cfg.hash_seed + n);
      const std::size_t bucket = static_cast<std::size_t>(h & 0xffffffffULL) % cfg.dim;
      v[bucket] += (h >> 63) != 0 ? -1.0 : 1.0;
    }
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

std::string node_string(const AstNode& node) {
  return node.type + "|" + node.text + "|" + std::to_string(node.start_line) + ":" +
         std::to_string(node.end_line);
}

Tensor2 node_features(const AstGraph& graph, const EmbedderConfig& cfg) {
  Tensor2 x(graph.size(), cfg.dim);
  for (const AstNode& node : graph.nodes()) {
    const auto v = embed_text(node_string(node), cfg);
    std::copy(v.begin(), v.end(), x.row(node.id).begin());
  }
  return x;
}

Tensor2 path_features(const AstGraph& graph, const EmbedderConfig& cfg) {
  const auto& paths = graph.paths();
  Tensor2 x(paths.size(), cfg.dim);
  for (std::size_t j = 0; j < paths.size(); ++j) {
    std::string joined;
    for (std::size_t k = 0; k < paths[j].size(); ++k) {
      if (k > 0) joined.push_back('/');
      joined += node_string(graph.node(paths[j][k]));
    }
    const auto v = embed_text(joined, cfg);
    std::copy(v.begin(), v.end(), x.row(j).begin());
  }
  return x;
}

Tensor2 augment(const Tensor2& x0_node, const Tensor2& x0_path, const AstGraph& graph) {
  const auto& paths = graph.paths();
  if (x0_node.rows() != graph.size() || x0_path.rows() != paths.size() ||
      x0_node.cols() != x0_path.cols())
    throw ShapeError("augment: feature shapes do not match the graph");
  Tensor2 acc(x0_node.rows(), x0_node.cols());
  std::vector<std::size_t> cover(graph.size(), 0);
  for (std::size_t j = 0; j < paths.size(); ++j) {
    const auto prow = x0_path.row(j);
    for (NodeId v : paths[j]) {
      ++cover[v];
      auto arow = acc.row(v);
      for (std::size_t c = 0; c < arow.size(); ++c) arow[c] += prow[c];
    }
  }
  Tensor2 out = x0_node;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    if (cover[i] == 0) continue;
    const double inv = 1.0 / static_cast<double>(cover[i]);
    auto orow = out.row(i);
    const auto arow = acc.row(i);
    for (std::size_t c = 0; c < orow.size(); ++c) orow[c] += arow[c] * inv;
  }
  return out;
}

InputPack make_inputs(const AstGraph& graph, const EmbedderConfig& cfg) {
  InputPack pack;
  pack.x0_node = node_features(graph, cfg);
  pack.x0_path = path_features(graph, cfg);
  pack.x0_ast = augment(pack.x0_node, pack.x0_path, graph);
  return pack;
}

}  // namespace heloc
