#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heloc/random.hpp"
#include "heloc/tensor.hpp"

namespace heloc {

using NodeId = std::size_t;

struct AstNode {
  NodeId id = 0;
  std::string type;
  std::string text;
  int start_line = 1;
  int end_line = 1;
  std::optional<NodeId> parent;
  std::vector<NodeId> children;

  bool operator==(const AstNode&) const = default;
};

/// Size limits applied to every tree. Trees deeper or larger than the limits are
/// rejected; root-to-leaf paths beyond max_paths are dropped.
struct TreeCaps {
  std::size_t max_depth = 30;
  std::size_t max_paths = 200;
  std::size_t max_nodes = 1000;
};

using Path = std::vector<NodeId>;

struct PathSet {
  std::vector<Path> paths;
  /// Leaves found before truncation. paths.size() < total_leaves iff truncated.
  std::size_t total_leaves = 0;

  std::size_t dropped() const noexcept { return total_leaves - paths.size(); }
};

/// A validated tree with its derived levels and root-to-leaf paths.
class AstGraph {
 public:
  /// Validates the node list (ids 0..N-1 in order, one root, consistent
  /// parent/child links, no cycles) and derives levels and paths.
  /// Throws TreeError on structural problems and CapError on size limits.
  static AstGraph from_nodes(std::vector<AstNode> nodes, const TreeCaps& caps = {});

  const std::vector<AstNode>& nodes() const noexcept { return nodes_; }
  const AstNode& node(NodeId id) const { return nodes_.at(id); }
  NodeId root() const noexcept { return root_; }
  const std::vector<int>& levels() const noexcept { return levels_; }
  const std::vector<Path>& paths() const noexcept { return paths_.paths; }
  const PathSet& path_set() const noexcept { return paths_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Largest level in the tree.
  int depth() const noexcept { return depth_; }
  std::size_t leaf_count() const noexcept { return paths_.total_leaves; }

  bool operator==(const AstGraph& other) const { return nodes_ == other.nodes_; }

 private:
  std::vector<AstNode> nodes_;
  NodeId root_ = 0;
  std::vector<int> levels_;
  PathSet paths_;
  int depth_ = 0;
};

/// Edge distance of every node from the root, assigned in depth-first order.
std::vector<int> compute_levels(const AstGraph& graph);

/// One root-first path per leaf in depth-first leaf-discovery order, keeping
/// the first max_paths.
PathSet extract_paths(const AstGraph& graph, std::size_t max_paths);

/// Ã = A + I with A[j][i] = 1 iff node i is the parent of node j, and the
/// inverse row sums of Ã.
struct AdjacencyPack {
  Tensor2 a_tilde;
  std::vector<double> d_tilde_inv;

  /// D̃⁻¹ Ã as a sparse operator.
  CsrMatrix normalized() const;
};

AdjacencyPack build_adjacency(const AstGraph& graph);

struct Triplet {
  NodeId anchor = 0;
  NodeId positive = 0;
  NodeId negative = 0;

  bool operator==(const Triplet&) const = default;
};

struct TripletBatch {
  std::vector<Triplet> triples;
  /// |level(negative) − level(anchor)| per triple.
  std::vector<int> delta_l;
  /// Set when the tree has no node with both a same-level peer and a
  /// different-level node, so no triple could be formed.
  bool no_valid_anchor = false;

  bool empty() const noexcept { return triples.empty(); }
  std::vector<std::array<std::size_t, 3>> index_triples() const;
};

/// Draws `count` triples: anchor uniform among nodes that have a same-level
/// peer and a different-level node, positive uniform among the anchor's
/// same-level peers, negative uniform among nodes at other levels.
TripletBatch sample_triplets(const AstGraph& graph, std::size_t count, Rng& rng);
TripletBatch sample_triplets(const AstGraph& graph, std::size_t count, std::uint64_t seed);

}  // namespace heloc
