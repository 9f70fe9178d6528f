#pragma once

// Test helper: exhaustive enumeration of single-predictor tree structures
// together with their exact prior probabilities, computed independently of
// log_tree_structure_prior. A structure is identified by a canonical string.

#include <array>
#include <string>
#include <vector>

#include "ivbart/tree.hpp"

namespace ivbart_test {

struct EnumTree {
  ivbart::RegressionTree tree{ivbart::LeafKind::Constant};
  double prob = 0.0;
};

inline std::string structure_key(const ivbart::RegressionTree& t, int id = 0) {
  const ivbart::TreeNode& n = t.node(id);
  if (n.is_leaf()) return "L";
  return "(" + std::to_string(n.var) + ":" + std::to_string(n.cut) + " " +
         structure_key(t, n.left) + " " + structure_key(t, n.right) + ")";
}

inline void enumerate_rec(const ivbart::RegressionTree& t, double prob,
                          std::vector<std::array<int, 3>> frontier,
                          const ivbart::TreePriorConfig& cfg,
                          std::vector<EnumTree>& out) {
  if (frontier.empty()) {
    out.push_back({t, prob});
    return;
  }
  const std::array<int, 3> f = frontier.back();
  frontier.pop_back();
  const int id = f[0], lo = f[1], hi = f[2];
  const int count = hi - lo;
  const int depth = t.depth(id);
  // leaf option: forced (prob 1) when no cut remains
  const double ps = count > 0 ? cfg.split_prob(depth) : 0.0;
  enumerate_rec(t, prob * (1.0 - ps), frontier, cfg, out);
  for (int c = lo; c < hi; ++c) {
    ivbart::RegressionTree t2 = t;
    const auto [l, r] = t2.grow(id, 0, c);
    auto f2 = frontier;
    f2.push_back({l, lo, c});
    f2.push_back({r, c + 1, hi});
    enumerate_rec(t2, prob * ps / count, f2, cfg, out);
  }
}

// all structures over a single predictor with n_cuts candidate cuts
inline std::vector<EnumTree> enumerate_trees(int n_cuts,
                                             const ivbart::TreePriorConfig& cfg) {
  std::vector<EnumTree> out;
  enumerate_rec(ivbart::RegressionTree(), 1.0, {{0, 0, n_cuts}}, cfg, out);
  return out;
}

}  // namespace ivbart_test
