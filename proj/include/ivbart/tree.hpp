#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivbart/common.hpp"

namespace ivbart {

// Per-predictor grids of candidate cut values. Continuous predictors get an
// equidistant interior grid; predictors with few distinct values (genotype
// codes 0/1/2, dummies) get the midpoints between consecutive observed values.
struct CutpointGrid {
  std::vector<std::vector<double>> cuts;

  int n_predictors() const { return static_cast<int>(cuts.size()); }
  int n_cuts(int var) const { return static_cast<int>(cuts[var].size()); }
  double value(int var, int cut) const { return cuts[var][cut]; }

  static CutpointGrid from_data(const Mat& x, int numcut = 100);
};

struct TreePriorConfig {
  double base = 0.95;   // split probability at the root
  double power = 2.0;   // depth decay exponent
  double p_grow = 0.4;
  double p_prune = 0.4;
  double p_change = 0.2;

  double split_prob(int depth) const {
    return base * std::pow(1.0 + static_cast<double>(depth), -power);
  }
};

enum class LeafKind { Constant, Linear };

// Leaves carry either a constant `a` or a line a + b * exposure.
struct TreeNode {
  int parent = -1;
  int left = -1;  // < 0 marks a leaf
  int right = -1;
  int var = -1;   // split predictor (internal nodes only)
  int cut = -1;   // index into the grid of `var`
  double a = 0.0;
  double b = 0.0;

  bool is_leaf() const { return left < 0; }
};

// Index range [lo, hi) of structurally valid cut indices.
struct CutRange {
  int lo = 0;
  int hi = 0;
  int count() const { return hi > lo ? hi - lo : 0; }
};

class RegressionTree {
 public:
  explicit RegressionTree(LeafKind kind = LeafKind::Constant)
      : kind_(kind), nodes_(1) {}

  LeafKind kind() const { return kind_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const { return nodes_[id]; }
  TreeNode& node(int id) { return nodes_[id]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  int depth(int id) const {
    int d = 0;
    while (nodes_[id].parent >= 0) {
      id = nodes_[id].parent;
      ++d;
    }
    return d;
  }

  std::vector<int> leaves() const;
  std::vector<int> internal_nodes() const;
  // internal nodes whose children are both leaves
  std::vector<int> nog_nodes() const;

  // cut indices of `var` still usable at `id` given the rules on its ancestors
  CutRange valid_cut_range(int id, int var, const CutpointGrid& grid) const;
  std::vector<int> available_predictors(int id, const CutpointGrid& grid) const;

  // splits leaf `id` on (var, cut); returns (left, right) ids
  std::pair<int, int> grow(int id, int var, int cut);
  // collapses the children of nog node `id` (ids are remapped; tree compacts)
  void prune(int id);

  template <class XFn>
  int find_leaf(XFn&& xcol, const CutpointGrid& grid) const {
    int id = 0;
    while (!nodes_[id].is_leaf()) {
      const TreeNode& n = nodes_[id];
      id = xcol(n.var) < grid.value(n.var, n.cut) ? n.left : n.right;
    }
    return id;
  }

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  LeafKind kind_;
  std::vector<TreeNode> nodes_;
};

inline double leaf_value(const RegressionTree& tree, int leaf, double exposure) {
  const TreeNode& n = tree.node(leaf);
  return tree.kind() == LeafKind::Linear ? n.a + n.b * exposure : n.a;
}

// payload of the unique leaf reached by row `i` of `x`
double evaluate_tree(const RegressionTree& tree, const CutpointGrid& grid,
                     const Mat& x, int row, double exposure = 0.0);

double log_tree_structure_prior(const RegressionTree& tree,
                                const TreePriorConfig& cfg,
                                const CutpointGrid& grid);

// row indices per node id; only leaves are populated
std::vector<std::vector<int>> partition_rows(const RegressionTree& tree,
                                             const CutpointGrid& grid,
                                             const Mat& x);

}  // namespace ivbart
