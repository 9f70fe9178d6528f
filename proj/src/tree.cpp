#include "ivbart/tree.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace ivbart {

CutpointGrid CutpointGrid::from_data(const Mat& x, int numcut) {
  check(numcut >= 1, "numcut must be positive");
  CutpointGrid grid;
  grid.cuts.resize(x.cols());
  for (int j = 0; j < x.cols(); ++j) {
    std::vector<double> vals(x.col(j).data(), x.col(j).data() + x.rows());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    std::vector<double>& cj = grid.cuts[j];
    if (static_cast<int>(vals.size()) <= 1) {
      continue;  // constant column: no usable cuts
    }
    if (static_cast<int>(vals.size()) <= 10) {
      // few distinct values: midpoints separate every observed pair
      for (size_t k = 0; k + 1 < vals.size(); ++k)
        cj.push_back(0.5 * (vals[k] + vals[k + 1]));
    } else {
      const double lo = vals.front(), hi = vals.back();
      cj.resize(numcut);
      for (int k = 0; k < numcut; ++k)
        cj[k] = lo + (hi - lo) * static_cast<double>(k + 1) /
                         static_cast<double>(numcut + 1);
    }
  }
  return grid;
}

std::vector<int> RegressionTree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::vector<int> RegressionTree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (!nodes_[i].is_leaf()) out.push_back(i);
  return out;
}

std::vector<int> RegressionTree::nog_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (!n.is_leaf() && nodes_[n.left].is_leaf() && nodes_[n.right].is_leaf())
      out.push_back(i);
  }
  return out;
}

CutRange RegressionTree::valid_cut_range(int id, int var,
                                         const CutpointGrid& grid) const {
  CutRange r{0, grid.n_cuts(var)};
  int child = id;
  int par = nodes_[id].parent;
  while (par >= 0) {
    const TreeNode& p = nodes_[par];
    if (p.var == var) {
      if (child == p.left)
        r.hi = std::min(r.hi, p.cut);
      else
        r.lo = std::max(r.lo, p.cut + 1);
    }
    child = par;
    par = p.parent;
  }
  return r;
}

std::vector<int> RegressionTree::available_predictors(
    int id, const CutpointGrid& grid) const {
  std::vector<int> out;
  for (int v = 0; v < grid.n_predictors(); ++v)
    if (valid_cut_range(id, v, grid).count() > 0) out.push_back(v);
  return out;
}

std::pair<int, int> RegressionTree::grow(int id, int var, int cut) {
  check(nodes_[id].is_leaf(), "grow target must be a leaf");
  const int l = size();
  const int r = l + 1;
  nodes_.emplace_back();
  nodes_.emplace_back();
  nodes_[l].parent = id;
  nodes_[r].parent = id;
  TreeNode& n = nodes_[id];
  n.left = l;
  n.right = r;
  n.var = var;
  n.cut = cut;
  n.a = n.b = 0.0;
  return {l, r};
}

void RegressionTree::prune(int id) {
  const TreeNode& n = nodes_[id];
  check(!n.is_leaf() && nodes_[n.left].is_leaf() && nodes_[n.right].is_leaf(),
        "prune target must have two leaf children");
  const int drop_l = n.left, drop_r = n.right;
  std::vector<int> remap(size(), -1);
  int next = 0;
  for (int i = 0; i < size(); ++i)
    if (i != drop_l && i != drop_r) remap[i] = next++;
  std::vector<TreeNode> packed;
  packed.reserve(next);
  for (int i = 0; i < size(); ++i) {
    if (remap[i] < 0) continue;
    TreeNode m = nodes_[i];
    if (i == id) {
      m.left = m.right = m.var = m.cut = -1;
      m.a = m.b = 0.0;
    } else {
      if (m.left >= 0) m.left = remap[m.left];
      if (m.right >= 0) m.right = remap[m.right];
    }
    if (m.parent >= 0) m.parent = remap[m.parent];
    packed.push_back(m);
  }
  nodes_ = std::move(packed);
}

nlohmann::json RegressionTree::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_ == LeafKind::Linear ? "linear" : "constant";
  nlohmann::json arr = nlohmann::json::array();
  for (const TreeNode& n : nodes_) {
    nlohmann::json e;
    e["parent"] = n.parent;
    if (n.is_leaf()) {
      if (kind_ == LeafKind::Linear)
        e["value"] = {n.a, n.b};
      else
        e["value"] = n.a;
    } else {
      e["left"] = n.left;
      e["right"] = n.right;
      e["var"] = n.var;
      e["cut"] = n.cut;
    }
    arr.push_back(std::move(e));
  }
  j["nodes"] = std::move(arr);
  return j;
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  check(kind == "constant" || kind == "linear", "unknown tree kind: " + kind);
  RegressionTree tree(kind == "linear" ? LeafKind::Linear : LeafKind::Constant);
  const nlohmann::json& arr = j.at("nodes");
  check(arr.is_array() && !arr.empty(), "tree must have at least one node");
  const int n = static_cast<int>(arr.size());
  tree.nodes_.assign(n, TreeNode{});
  for (int i = 0; i < n; ++i) {
    const nlohmann::json& e = arr[i];
    TreeNode& m = tree.nodes_[i];
    m.parent = e.at("parent").get<int>();
    check(m.parent >= -1 && m.parent < n && m.parent != i,
          "node parent out of range");
    if (e.contains("left")) {
      m.left = e.at("left").get<int>();
      m.right = e.at("right").get<int>();
      m.var = e.at("var").get<int>();
      m.cut = e.at("cut").get<int>();
      check(m.left > 0 && m.left < n && m.right > 0 && m.right < n &&
                m.left != m.right,
            "child ids out of range");
      check(m.var >= 0 && m.cut >= 0, "split rule must be non-negative");
    } else {
      const nlohmann::json& v = e.at("value");
      if (tree.kind_ == LeafKind::Linear) {
        check(v.is_array() && v.size() == 2, "linear leaf wants [a, b]");
        m.a = v[0].get<double>();
        m.b = v[1].get<double>();
      } else {
        m.a = v.get<double>();
      }
    }
  }
  check(tree.nodes_[0].parent == -1, "node 0 must be the root");
  // every non-root node must be reachable as the child its parent names
  for (int i = 1; i < n; ++i) {
    const TreeNode& p = tree.nodes_[tree.nodes_[i].parent];
    check(p.left == i || p.right == i, "parent/child links disagree");
  }
  return tree;
}

double evaluate_tree(const RegressionTree& tree, const CutpointGrid& grid,
                     const Mat& x, int row, double exposure) {
  const int leaf =
      tree.find_leaf([&](int v) { return x(row, v); }, grid);
  return leaf_value(tree, leaf, exposure);
}

double log_tree_structure_prior(const RegressionTree& tree,
                                const TreePriorConfig& cfg,
                                const CutpointGrid& grid) {
  double lp = 0.0;
  for (int i = 0; i < tree.size(); ++i) {
    const TreeNode& n = tree.node(i);
    const double ps = cfg.split_prob(tree.depth(i));
    if (n.is_leaf()) {
      // a leaf with no usable cutpoint anywhere is forced: probability one
      if (!tree.available_predictors(i, grid).empty()) lp += std::log1p(-ps);
    } else {
      const int navail =
          static_cast<int>(tree.available_predictors(i, grid).size());
      const int ncut = tree.valid_cut_range(i, n.var, grid).count();
      check(navail > 0 && ncut > 0, "internal node with no valid rule");
      lp += std::log(ps) - std::log(static_cast<double>(navail)) -
            std::log(static_cast<double>(ncut));
    }
  }
  return lp;
}

std::vector<std::vector<int>> partition_rows(const RegressionTree& tree,
                                             const CutpointGrid& grid,
                                             const Mat& x) {
  std::vector<std::vector<int>> rows(tree.size());
  for (int i = 0; i < x.rows(); ++i) {
    const int leaf = tree.find_leaf([&](int v) { return x(i, v); }, grid);
    rows[leaf].push_back(i);
  }
  return rows;
}

}  // namespace ivbart
