#pragma once

#include <vector>

#include "ivbart/rng.hpp"
#include "ivbart/tree.hpp"
#include "ivbart/tree_mcmc.hpp"

namespace ivbart {

// Prior scale for a single leaf so that the sum of n_trees independent leaves
// has standard deviation data_range / (2k).
double leaf_prior_scale(double data_range, double k, int n_trees);

struct LeafPriorSpec {
  double sigma_a = 1.0;  // constant leaf value, or the intercept of a line
  double sigma_b = 1.0;  // line slope (Linear kind only)
};

// Weighted sufficient statistics of the rows in one leaf. `v` is the per-row
// residual variance, so sums are precision-weighted.
struct LeafSuff {
  double n = 0.0;
  double log_v = 0.0;     // sum log v_i
  double inv_v = 0.0;     // sum 1 / v_i
  double r_inv_v = 0.0;   // sum r_i / v_i
  double rr_inv_v = 0.0;  // sum r_i^2 / v_i
  double t_inv_v = 0.0;   // sum t_i / v_i        (Linear)
  double tt_inv_v = 0.0;  // sum t_i^2 / v_i      (Linear)
  double rt_inv_v = 0.0;  // sum r_i t_i / v_i    (Linear)

  void add(double r, double v) {
    n += 1.0;
    log_v += std::log(v);
    inv_v += 1.0 / v;
    r_inv_v += r / v;
    rr_inv_v += r * r / v;
  }
  void add(double r, double t, double v) {
    add(r, v);
    t_inv_v += t / v;
    tt_inv_v += t * t / v;
    rt_inv_v += r * t / v;
  }
};

// Integrated likelihood of the leaf's rows with the payload marginalized out.
// `weight` tempers the likelihood: weight 0 gives log 1 (prior recovery).
double log_marginal_constant(const LeafSuff& s, double sigma_a, double weight);
double log_marginal_linear(const LeafSuff& s, double sigma_a, double sigma_b,
                           double weight);

// Conjugate posterior draws for the leaf payload.
double draw_constant_leaf(const LeafSuff& s, double sigma_a, double weight,
                          Rng& rng);
Vec2 draw_linear_leaf(const LeafSuff& s, double sigma_a, double sigma_b,
                      double weight, Rng& rng);

// Sum of leaf log-marginals over the subtree rooted at `start`, for the rows
// in `rows`, with residuals `r` and variances `v` indexed by row.
double log_marginal_subtree(const RegressionTree& tree, const CutpointGrid& grid,
                            const Mat& x, const Vec& exposure, int start,
                            const std::vector<int>& rows, const Vec& r,
                            const Vec& v, const LeafPriorSpec& prior,
                            double weight);

struct EnsembleConfig {
  int n_trees = 200;
  int numcut = 100;
  LeafKind kind = LeafKind::Constant;
  TreePriorConfig tree_prior;
  LeafPriorSpec leaf_prior;
  double likelihood_weight = 1.0;
};

struct SweepStats {
  int proposed = 0;
  int accepted = 0;
};

// A sum-of-trees function of a fixed design matrix, refreshed in place by
// Bayesian backfitting. For Linear leaves each row also carries an exposure
// value multiplying the leaf slopes.
class Ensemble {
 public:
  Ensemble(EnsembleConfig cfg, Mat x, Vec exposure = Vec());

  const EnsembleConfig& config() const { return cfg_; }
  const CutpointGrid& grid() const { return grid_; }
  const Mat& x() const { return x_; }
  const Vec& exposure() const { return exposure_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  std::vector<RegressionTree>& trees() { return trees_; }

  // current in-sample prediction, kept in sync with the trees
  const Vec& fit() const { return fit_; }

  // one Metropolis-within-Gibbs pass over every tree: structural move, then a
  // fresh payload draw for every leaf, against target values and per-row
  // residual variances v
  SweepStats backfit_sweep(const Vec& target, const Vec& v, Rng& rng);

  // rebuilds cached partitions and the fit vector from the trees (used after
  // loading trees from a snapshot)
  void refresh();

 private:
  Vec tree_prediction(int j) const;

  EnsembleConfig cfg_;
  Mat x_;
  Vec exposure_;
  CutpointGrid grid_;
  std::vector<RegressionTree> trees_;
  std::vector<std::vector<std::vector<int>>> part_;  // tree -> leaf -> rows
  Vec fit_;
};

}  // namespace ivbart
