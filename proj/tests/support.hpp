#pragma once

// Tree builders and brute-force reference implementations shared by the unit
// and acceptance suites. The references evaluate formulas directly with plain
// loops and never call into the library's loss or metric code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "heloc/ast.hpp"
#include "heloc/random.hpp"

namespace heloc::testing {

/// Builds a tree from a parent list (parent[i] < 0 marks the root). Children
/// are ordered by id.
inline AstGraph tree_from_parents(const std::vector<int>& parent, const TreeCaps& caps = {}) {
  std::vector<AstNode> nodes(parent.size());
  for (std::size_t i = 0; i < parent.size(); ++i) {
    nodes[i].id = i;
    nodes[i].type = parent[i] < 0 ? "Root" : "Node";
    nodes[i].text = "n" + std::to_string(i);
    nodes[i].start_line = static_cast<int>(i) + 1;
    nodes[i].end_line = static_cast<int>(i) + 1;
    if (parent[i] >= 0) {
      nodes[i].parent = static_cast<NodeId>(parent[i]);
      nodes[static_cast<std::size_t>(parent[i])].children.push_back(i);
    }
  }
  return AstGraph::from_nodes(std::move(nodes), caps);
}

inline AstGraph single_node() { return tree_from_parents({-1}); }
inline AstGraph chain4() { return tree_from_parents({-1, 0, 1, 2}); }
/// Full binary tree of depth 2: 0 → {1, 2}, 1 → {3, 4}, 2 → {5, 6}.
inline AstGraph full_binary2() { return tree_from_parents({-1, 0, 0, 1, 1, 2, 2}); }

/// The running example: R → P → {A, B, C}; C → D; D → E.
/// Ids: R=0, P=1, A=2, B=3, C=4, D=5, E=6.
struct Figure1 {
  static constexpr NodeId R = 0, P = 1, A = 2, B = 3, C = 4, D = 5, E = 6;
  static AstGraph tree() { return tree_from_parents({-1, 0, 1, 1, 1, 4, 5}); }
};

/// Random tree in which each new node attaches to a uniformly chosen earlier
/// node whose level keeps the depth within max_depth.
inline AstGraph random_tree(std::size_t n, Rng& rng, int max_depth = 6) {
  std::vector<int> parent(n, -1);
  std::vector<int> level(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t p = 0;
    do {
      p = static_cast<std::size_t>(rng.index(i));
    } while (level[p] + 1 > max_depth);
    parent[i] = static_cast<int>(p);
    level[i] = level[p] + 1;
  }
  return tree_from_parents(parent);
}

/// Σ_i −log(exp(z_i[l_i]) / Σ_c exp(z_i[c])), evaluated without any shift.
inline double reference_nep_loss(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& levels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double z = 0.0;
    for (double v : logits[i]) z += std::exp(v);
    loss += -std::log(std::exp(logits[i][static_cast<std::size_t>(levels[i])]) / z);
  }
  return loss;
}

struct RefTriple {
  std::size_t a, p, n;
  int delta_l;
};

inline double reference_nro_loss(const std::vector<std::vector<double>>& x,
                                 const std::vector<RefTriple>& triples, double margin) {
  double loss = 0.0;
  for (const auto& t : triples) {
    double dp = 0.0, dn = 0.0;
    for (std::size_t c = 0; c < x[t.a].size(); ++c) {
      dp += (x[t.a][c] - x[t.p][c]) * (x[t.a][c] - x[t.p][c]);
      dn += (x[t.a][c] - x[t.n][c]) * (x[t.a][c] - x[t.n][c]);
    }
    loss += std::max(0.0, dp - dn + t.delta_l + margin);
  }
  return loss;
}

/// Adjusted Rand index by explicit pair counting over all (i, j), i < j.
inline double reference_ari(const std::vector<int>& u, const std::vector<int>& v) {
  const std::size_t n = u.size();
  // Pair agreement counts: both together, together in u only, in v only.
  double both = 0.0, in_u = 0.0, in_v = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool su = u[i] == u[j];
      const bool sv = v[i] == v[j];
      pairs += 1.0;
      if (su && sv) both += 1.0;
      if (su) in_u += 1.0;
      if (sv) in_v += 1.0;
    }
  if (pairs == 0.0) return 1.0;
  const double expected = in_u * in_v / pairs;
  const double max_index = 0.5 * (in_u + in_v);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

}  // namespace heloc::testing
