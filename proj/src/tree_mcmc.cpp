#include "ivbart/tree_mcmc.hpp"

#include <cmath>

namespace ivbart {

namespace {

std::vector<int> growable_leaves(const RegressionTree& tree,
                                 const CutpointGrid& grid) {
  std::vector<int> out;
  for (int id : tree.leaves())
    if (!tree.available_predictors(id, grid).empty()) out.push_back(id);
  return out;
}

// routes `row` from `start` to a leaf of `tree`
int descend(const RegressionTree& tree, const CutpointGrid& grid, const Mat& x,
            int row, int start) {
  int id = start;
  while (!tree.node(id).is_leaf()) {
    const TreeNode& n = tree.node(id);
    id = x(row, n.var) < grid.value(n.var, n.cut) ? n.left : n.right;
  }
  return id;
}

std::vector<int> subtree_nodes(const RegressionTree& tree, int root) {
  std::vector<int> out, stack{root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const TreeNode& n = tree.node(id);
    if (!n.is_leaf()) {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return out;
}

}  // namespace

EffectiveMoveProbs effective_move_probs(const RegressionTree& tree,
                                        const TreePriorConfig& cfg,
                                        const CutpointGrid& grid) {
  EffectiveMoveProbs p;
  const bool can_grow = !growable_leaves(tree, grid).empty();
  const bool can_shrink = tree.size() > 1;  // some internal node exists
  const double total = (can_grow ? cfg.p_grow : 0.0) +
                       (can_shrink ? cfg.p_prune : 0.0) +
                       (can_shrink ? cfg.p_change : 0.0);
  if (total <= 0.0) return p;
  if (can_grow) p.grow = cfg.p_grow / total;
  if (can_shrink) {
    p.prune = cfg.p_prune / total;
    p.change = cfg.p_change / total;
  }
  return p;
}

Proposal propose_move(const RegressionTree& tree, const TreePriorConfig& cfg,
                      const CutpointGrid& grid, const Mat& x,
                      const std::vector<std::vector<int>>& leaf_rows,
                      Rng& rng) {
  Proposal prop;
  const EffectiveMoveProbs p = effective_move_probs(tree, cfg, grid);
  const double total = p.grow + p.prune + p.change;
  if (total <= 0.0) return prop;

  const double u = rng.uniform() * total;
  const MoveTag tag = u < p.grow              ? MoveTag::Grow
                      : u < p.grow + p.prune  ? MoveTag::Prune
                                              : MoveTag::Change;
  prop.tag = tag;

  if (tag == MoveTag::Grow) {
    const std::vector<int> growable = growable_leaves(tree, grid);
    const int leaf = growable[rng.index(growable.size())];
    const std::vector<int> avail = tree.available_predictors(leaf, grid);
    const int var = avail[rng.index(avail.size())];
    const CutRange range = tree.valid_cut_range(leaf, var, grid);
    const int cut = range.lo + static_cast<int>(rng.index(range.count()));
    const double cutval = grid.value(var, cut);

    int n_left = 0;
    for (int row : leaf_rows[leaf])
      if (x(row, var) < cutval) ++n_left;
    const int n_right = static_cast<int>(leaf_rows[leaf].size()) - n_left;
    if (n_left == 0 || n_right == 0) return prop;  // empty child: reject

    prop.tree = tree;
    prop.tree.grow(leaf, var, cut);
    prop.pivot = leaf;
    const EffectiveMoveProbs pp = effective_move_probs(prop.tree, cfg, grid);
    const int n_nog = static_cast<int>(prop.tree.nog_nodes().size());
    const double log_fwd = std::log(p.grow) -
                           std::log(static_cast<double>(growable.size())) -
                           std::log(static_cast<double>(avail.size())) -
                           std::log(static_cast<double>(range.count()));
    const double log_rev =
        std::log(pp.prune) - std::log(static_cast<double>(n_nog));
    prop.log_q_ratio = log_rev - log_fwd;
    prop.valid = true;
    return prop;
  }

  if (tag == MoveTag::Prune) {
    const std::vector<int> nogs = tree.nog_nodes();
    const int id = nogs[rng.index(nogs.size())];
    const int var_old = tree.node(id).var;

    prop.tree = tree;
    prop.tree.prune(id);  // children had larger ids, so `id` is unchanged
    prop.pivot = id;
    const EffectiveMoveProbs pp = effective_move_probs(prop.tree, cfg, grid);
    const std::vector<int> growable = growable_leaves(prop.tree, grid);
    const std::vector<int> avail = prop.tree.available_predictors(id, grid);
    const CutRange range = prop.tree.valid_cut_range(id, var_old, grid);
    const double log_fwd =
        std::log(p.prune) - std::log(static_cast<double>(nogs.size()));
    const double log_rev = std::log(pp.grow) -
                           std::log(static_cast<double>(growable.size())) -
                           std::log(static_cast<double>(avail.size())) -
                           std::log(static_cast<double>(range.count()));
    prop.log_q_ratio = log_rev - log_fwd;
    prop.valid = true;
    return prop;
  }

  // CHANGE: redraw the rule of one internal node, keeping the topology
  const std::vector<int> internals = tree.internal_nodes();
  const int id = internals[rng.index(internals.size())];
  const int var_old = tree.node(id).var;
  // cut ranges at `id` depend only on its ancestors, so they agree in T and T'
  const std::vector<int> avail = tree.available_predictors(id, grid);
  const int var_new = avail[rng.index(avail.size())];
  const CutRange range_new = tree.valid_cut_range(id, var_new, grid);
  const int cut_new = range_new.lo + static_cast<int>(rng.index(range_new.count()));
  const int k_old = tree.valid_cut_range(id, var_old, grid).count();

  prop.tree = tree;
  prop.tree.node(id).var = var_new;
  prop.tree.node(id).cut = cut_new;
  prop.pivot = id;

  // the new rule may knock a descendant's rule out of its valid range
  const std::vector<int> sub = subtree_nodes(prop.tree, id);
  for (int d : sub) {
    const TreeNode& n = prop.tree.node(d);
    if (n.is_leaf()) continue;
    const CutRange r = prop.tree.valid_cut_range(d, n.var, grid);
    if (n.cut < r.lo || n.cut >= r.hi) return prop;  // zero prior: reject
  }

  // re-route the subtree's rows; reject if any leaf under `id` goes empty
  std::vector<int> counts(prop.tree.size(), 0);
  for (int d : sub) {
    if (!tree.node(d).is_leaf()) continue;
    for (int row : leaf_rows[d]) ++counts[descend(prop.tree, grid, x, row, id)];
  }
  for (int d : sub)
    if (prop.tree.node(d).is_leaf() && counts[d] == 0) return prop;

  const EffectiveMoveProbs pp = effective_move_probs(prop.tree, cfg, grid);
  // node count, the picked node, and its predictor set are shared, so only the
  // cut counts and the effective CHANGE probabilities survive in the ratio
  prop.log_q_ratio = std::log(pp.change) - std::log(p.change) +
                     std::log(static_cast<double>(range_new.count())) -
                     std::log(static_cast<double>(k_old));
  prop.valid = true;
  return prop;
}

}  // namespace ivbart
