#include "ivbart/ensemble.hpp"

#include <cmath>

#include "ivbart/stats.hpp"

namespace ivbart {

double leaf_prior_scale(double data_range, double k, int n_trees) {
  check(data_range > 0.0 && k > 0.0 && n_trees > 0,
        "leaf_prior_scale wants positive inputs");
  return data_range / (2.0 * k * std::sqrt(static_cast<double>(n_trees)));
}

double log_marginal_constant(const LeafSuff& s, double sigma_a, double weight) {
  const double prior_prec = 1.0 / (sigma_a * sigma_a);
  const double a = weight * s.inv_v;
  const double b = weight * s.r_inv_v;
  const double c = weight * s.rr_inv_v;
  const double post_prec = prior_prec + a;
  return -0.5 * weight * s.n * kLogTwoPi - 0.5 * weight * s.log_v -
         0.5 * std::log(sigma_a * sigma_a * post_prec) -
         0.5 * (c - b * b / post_prec);
}

double log_marginal_linear(const LeafSuff& s, double sigma_a, double sigma_b,
                           double weight) {
  const double pa = 1.0 / (sigma_a * sigma_a);
  const double pb = 1.0 / (sigma_b * sigma_b);
  const double l00 = pa + weight * s.inv_v;
  const double l01 = weight * s.t_inv_v;
  const double l11 = pb + weight * s.tt_inv_v;
  const double det = l00 * l11 - l01 * l01;
  const double b0 = weight * s.r_inv_v;
  const double b1 = weight * s.rt_inv_v;
  // b' Lambda^{-1} b with the 2x2 inverse written out
  const double quad = (b0 * (l11 * b0 - l01 * b1) + b1 * (l00 * b1 - l01 * b0)) / det;
  return -0.5 * weight * s.n * kLogTwoPi - 0.5 * weight * s.log_v +
         0.5 * std::log(pa * pb) - 0.5 * std::log(det) -
         0.5 * (weight * s.rr_inv_v - quad);
}

double draw_constant_leaf(const LeafSuff& s, double sigma_a, double weight,
                          Rng& rng) {
  const double post_prec = 1.0 / (sigma_a * sigma_a) + weight * s.inv_v;
  const double mean = weight * s.r_inv_v / post_prec;
  return mean + rng.normal() / std::sqrt(post_prec);
}

Vec2 draw_linear_leaf(const LeafSuff& s, double sigma_a, double sigma_b,
                      double weight, Rng& rng) {
  const double l00 = 1.0 / (sigma_a * sigma_a) + weight * s.inv_v;
  const double l01 = weight * s.t_inv_v;
  const double l11 = 1.0 / (sigma_b * sigma_b) + weight * s.tt_inv_v;
  const double det = l00 * l11 - l01 * l01;
  const double b0 = weight * s.r_inv_v;
  const double b1 = weight * s.rt_inv_v;
  Vec2 mean;
  mean << (l11 * b0 - l01 * b1) / det, (l00 * b1 - l01 * b0) / det;
  // Lambda = L L', sample = mean + L^{-T} z
  const double c00 = std::sqrt(l00);
  const double c10 = l01 / c00;
  const double c11 = std::sqrt(l11 - c10 * c10);
  const double z0 = rng.normal(), z1 = rng.normal();
  Vec2 out;
  out(1) = mean(1) + z1 / c11;
  out(0) = mean(0) + (z0 - c10 * (z1 / c11)) / c00;
  return out;
}

double log_marginal_subtree(const RegressionTree& tree, const CutpointGrid& grid,
                            const Mat& x, const Vec& exposure, int start,
                            const std::vector<int>& rows, const Vec& r,
                            const Vec& v, const LeafPriorSpec& prior,
                            double weight) {
  std::vector<LeafSuff> suff(tree.size());
  std::vector<int> touched;
  for (int row : rows) {
    int id = start;
    while (!tree.node(id).is_leaf()) {
      const TreeNode& n = tree.node(id);
      id = x(row, n.var) < grid.value(n.var, n.cut) ? n.left : n.right;
    }
    if (suff[id].n == 0.0) touched.push_back(id);
    if (tree.kind() == LeafKind::Linear)
      suff[id].add(r(row), exposure(row), v(row));
    else
      suff[id].add(r(row), v(row));
  }
  double lm = 0.0;
  for (int id : touched)
    lm += tree.kind() == LeafKind::Linear
              ? log_marginal_linear(suff[id], prior.sigma_a, prior.sigma_b,
                                    weight)
              : log_marginal_constant(suff[id], prior.sigma_a, weight);
  return lm;
}

Ensemble::Ensemble(EnsembleConfig cfg, Mat x, Vec exposure)
    : cfg_(cfg),
      x_(std::move(x)),
      exposure_(std::move(exposure)),
      grid_(CutpointGrid::from_data(x_, cfg.numcut)) {
  check(cfg_.n_trees > 0, "ensemble needs at least one tree");
  check(cfg_.kind == LeafKind::Constant || exposure_.size() == x_.rows(),
        "linear leaves need one exposure value per row");
  trees_.assign(cfg_.n_trees, RegressionTree(cfg_.kind));
  refresh();
}

void Ensemble::refresh() {
  part_.resize(trees_.size());
  for (size_t j = 0; j < trees_.size(); ++j)
    part_[j] = partition_rows(trees_[j], grid_, x_);
  fit_ = Vec::Zero(x_.rows());
  for (size_t j = 0; j < trees_.size(); ++j) fit_ += tree_prediction(j);
}

Vec Ensemble::tree_prediction(int j) const {
  Vec pred = Vec::Zero(x_.rows());
  const RegressionTree& tree = trees_[j];
  for (int leaf = 0; leaf < tree.size(); ++leaf) {
    if (!tree.node(leaf).is_leaf()) continue;
    for (int row : part_[j][leaf])
      pred(row) = leaf_value(tree, leaf,
                             exposure_.size() > 0 ? exposure_(row) : 0.0);
  }
  return pred;
}

SweepStats Ensemble::backfit_sweep(const Vec& target, const Vec& v, Rng& rng) {
  check(target.size() == x_.rows() && v.size() == x_.rows(),
        "target/variance length mismatch");
  SweepStats stats;
  const double w = cfg_.likelihood_weight;
  for (size_t j = 0; j < trees_.size(); ++j) {
    RegressionTree& tree = trees_[j];
    fit_ -= tree_prediction(j);
    const Vec r = target - fit_;

    Proposal prop = propose_move(tree, cfg_.tree_prior, grid_, x_, part_[j], rng);
    if (prop.tag != MoveTag::None) ++stats.proposed;
    if (prop.valid) {
      // rows routed through the pivot's subtree; identical set in both trees
      std::vector<int> rows;
      if (prop.tag == MoveTag::Grow) {
        rows = part_[j][prop.pivot];
      } else if (prop.tag == MoveTag::Prune) {
        const TreeNode& n = tree.node(prop.pivot);
        rows = part_[j][n.left];
        rows.insert(rows.end(), part_[j][n.right].begin(),
                    part_[j][n.right].end());
      } else {
        for (int id = 0; id < tree.size(); ++id)
          if (tree.node(id).is_leaf() && !part_[j][id].empty()) {
            // collect leaves inside the pivot's subtree
            int up = id;
            while (up >= 0 && up != prop.pivot) up = tree.node(up).parent;
            if (up == prop.pivot)
              rows.insert(rows.end(), part_[j][id].begin(), part_[j][id].end());
          }
      }
      const double lm_cur = log_marginal_subtree(
          tree, grid_, x_, exposure_, prop.pivot, rows, r, v, cfg_.leaf_prior, w);
      const double lm_new =
          log_marginal_subtree(prop.tree, grid_, x_, exposure_, prop.pivot,
                               rows, r, v, cfg_.leaf_prior, w);
      const double lp_cur = log_tree_structure_prior(tree, cfg_.tree_prior, grid_);
      const double lp_new =
          log_tree_structure_prior(prop.tree, cfg_.tree_prior, grid_);
      const double log_alpha =
          (lm_new - lm_cur) + (lp_new - lp_cur) + prop.log_q_ratio;
      if (std::log(rng.uniform()) < log_alpha) {
        tree = std::move(prop.tree);
        part_[j] = partition_rows(tree, grid_, x_);
        ++stats.accepted;
      }
    }

    // refresh every leaf payload from its conjugate posterior
    for (int leaf = 0; leaf < tree.size(); ++leaf) {
      if (!tree.node(leaf).is_leaf()) continue;
      LeafSuff s;
      for (int row : part_[j][leaf]) {
        if (cfg_.kind == LeafKind::Linear)
          s.add(r(row), exposure_(row), v(row));
        else
          s.add(r(row), v(row));
      }
      TreeNode& n = tree.node(leaf);
      if (cfg_.kind == LeafKind::Linear) {
        const Vec2 ab = draw_linear_leaf(s, cfg_.leaf_prior.sigma_a,
                                         cfg_.leaf_prior.sigma_b, w, rng);
        n.a = ab(0);
        n.b = ab(1);
      } else {
        n.a = draw_constant_leaf(s, cfg_.leaf_prior.sigma_a, w, rng);
      }
    }
    fit_ += tree_prediction(j);
  }
  // resum in fixed tree order so fit() matches a fresh prediction bit for bit
  fit_.setZero();
  for (size_t j = 0; j < trees_.size(); ++j) fit_ += tree_prediction(j);
  return stats;
}

}  // namespace ivbart
