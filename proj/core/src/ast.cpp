#include "heloc/ast.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "heloc/error.hpp"

namespace heloc {

AstGraph AstGraph::from_nodes(std::vector<AstNode> nodes, const TreeCaps& caps) {
  const std::size_t n = nodes.size();
  if (n == 0) throw TreeError("tree has no nodes");
  if (n > caps.max_nodes) throw CapError("max_nodes", caps.max_nodes, n);

  std::optional<NodeId> root;
  for (std::size_t i = 0; i < n; ++i) {
    const AstNode& node = nodes[i];
    if (node.id != i)
      throw TreeError("node at position " + std::to_string(i) + " has id " +
                      std::to_string(node.id));
    if (node.end_line < node.start_line)
      throw TreeError("node " + std::to_string(i) + " ends before it starts");
    if (!node.parent) {
      if (root) throw TreeError("multiple roots: " + std::to_string(*root) + " and " +
                                std::to_string(i));
      root = i;
      continue;
    }
    if (*node.parent == i) throw TreeError("cycle: node " + std::to_string(i) + " is its own parent");
    if (*node.parent >= n)
      throw TreeError("node " + std::to_string(i) + " has dangling parent " +
                      std::to_string(*node.parent));
  }
  if (!root) throw TreeError("cycle: no root node");

  // Every child list must be exactly the set of nodes naming that parent.
  std::vector<std::size_t> claimed(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (NodeId c : nodes[i].children) {
      if (c >= n) throw TreeError("node " + std::to_string(i) + " lists unknown child " +
                                  std::to_string(c));
      if (nodes[c].parent != i)
        throw TreeError("node " + std::to_string(c) + " listed as child of " + std::to_string(i) +
                        " but its parent differs");
      if (++claimed[c] > 1) throw TreeError("node " + std::to_string(c) + " listed twice as a child");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (nodes[i].parent && claimed[i] != 1)
      throw TreeError("node " + std::to_string(i) + " missing from its parent's children");

  AstGraph g;
  g.nodes_ = std::move(nodes);
  g.root_ = *root;

  // Reachability from the root; any unreachable node sits on a parent cycle.
  std::vector<NodeId> stack{g.root_};
  std::size_t reached = 0;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    ++reached;
    for (NodeId c : g.nodes_[v].children) stack.push_back(c);
  }
  if (reached != n) throw TreeError("cycle: " + std::to_string(n - reached) +
                                    " node(s) unreachable from the root");

  g.levels_ = compute_levels(g);
  g.depth_ = *std::max_element(g.levels_.begin(), g.levels_.end());
  if (static_cast<std::size_t>(g.depth_) > caps.max_depth)
    throw CapError("max_depth", caps.max_depth, static_cast<std::size_t>(g.depth_));
  g.paths_ = extract_paths(g, caps.max_paths);
  return g;
}

std::vector<int> compute_levels(const AstGraph& graph) {
  std::vector<int> levels(graph.size(), -1);
  std::vector<NodeId> stack{graph.root()};
  levels[graph.root()] = 0;
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    const auto& children = graph.node(v).children;
    for (auto it = children.rbegin(); it != children.rend(); ++it) {
      levels[*it] = levels[v] + 1;
      stack.push_back(*it);
    }
  }
  return levels;
}

PathSet extract_paths(const AstGraph& graph, std::size_t max_paths) {
  PathSet result;
  Path current;
  // (node, next child index) frames for an explicit preorder walk.
  std::vector<std::pair<NodeId, std::size_t>> frames{{graph.root(), 0}};
  current.push_back(graph.root());
  while (!frames.empty()) {
    auto& [v, next] = frames.back();
    const auto& children = graph.node(v).children;
    if (children.empty()) {
      ++result.total_leaves;
      if (result.paths.size() < max_paths) result.paths.push_back(current);
    }
    if (next < children.size()) {
      const NodeId c = children[next++];
      frames.emplace_back(c, 0);
      current.push_back(c);
    } else {
      frames.pop_back();
      current.pop_back();
    }
  }
  return result;
}

CsrMatrix AdjacencyPack::normalized() const {
  CsrMatrix m = CsrMatrix::from_dense(a_tilde);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t k = m.row_start[r]; k < m.row_start[r + 1]; ++k) m.values[k] *= d_tilde_inv[r];
  return m;
}

AdjacencyPack build_adjacency(const AstGraph& graph) {
  const std::size_t n = graph.size();
  AdjacencyPack pack{Tensor2::identity(n), std::vector<double>(n)};
  for (const AstNode& node : graph.nodes())
    if (node.parent) pack.a_tilde(node.id, *node.parent) = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : pack.a_tilde.row(i)) s += v;
    pack.d_tilde_inv[i] = 1.0 / s;
  }
  return pack;
}

std::vector<std::array<std::size_t, 3>> TripletBatch::index_triples() const {
  std::vector<std::array<std::size_t, 3>> out;
  out.reserve(triples.size());
  for (const Triplet& t : triples) out.push_back({t.anchor, t.positive, t.negative});
  return out;
}

TripletBatch sample_triplets(const AstGraph& graph, std::size_t count, Rng& rng) {
  const auto& levels = graph.levels();
  const std::size_t n = graph.size();
  std::vector<std::vector<NodeId>> by_level(static_cast<std::size_t>(graph.depth()) + 1);
  for (NodeId v = 0; v < n; ++v) by_level[static_cast<std::size_t>(levels[v])].push_back(v);

  std::vector<NodeId> anchors;
  if (by_level.size() > 1)
    for (NodeId v = 0; v < n; ++v)
      if (by_level[static_cast<std::size_t>(levels[v])].size() > 1) anchors.push_back(v);

  TripletBatch batch;
  if (anchors.empty()) {
    batch.no_valid_anchor = true;
    return batch;
  }
  batch.triples.reserve(count);
  batch.delta_l.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const NodeId anchor = anchors[rng.index(anchors.size())];
    const auto level = static_cast<std::size_t>(levels[anchor]);
    const auto& peers = by_level[level];
    // Skip the anchor's own slot when drawing a peer.
    const auto self = static_cast<std::size_t>(
        std::find(peers.begin(), peers.end(), anchor) - peers.begin());
    std::size_t pick = rng.index(peers.size() - 1);
    if (pick >= self) ++pick;
    const NodeId positive = peers[pick];

    std::size_t other = rng.index(n - peers.size());
    NodeId negative = 0;
    for (std::size_t l = 0; l < by_level.size(); ++l) {
      if (l == level) continue;
      if (other < by_level[l].size()) {
        negative = by_level[l][other];
        break;
      }
      other -= by_level[l].size();
    }
    batch.triples.push_back({anchor, positive, negative});
    batch.delta_l.push_back(std::abs(levels[negative] - levels[anchor]));
  }
  return batch;
}

TripletBatch sample_triplets(const AstGraph& graph, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  return sample_triplets(graph, count, rng);
}

}  // namespace heloc
