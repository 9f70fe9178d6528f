#include "ivbart/dpm.hpp"

#include <cmath>

#include "ivbart/stats.hpp"

namespace ivbart {

namespace {

Mat2 scatter_of_cluster(const Mat& errors, const std::vector<int>& assignments,
                        int cluster) {
  Mat2 s = Mat2::Zero();
  for (int i = 0; i < static_cast<int>(assignments.size()); ++i) {
    if (assignments[i] != cluster) continue;
    const Vec2 e = errors.row(i).transpose();
    s += e * e.transpose();
  }
  return s;
}

void remove_cluster(DPMState& state, int cluster) {
  const int last = state.n_clusters() - 1;
  if (cluster != last) {
    state.cluster_sigmas[cluster] = state.cluster_sigmas[last];
    state.cluster_sizes[cluster] = state.cluster_sizes[last];
    for (int& a : state.assignments)
      if (a == last) a = cluster;
  }
  state.cluster_sigmas.pop_back();
  state.cluster_sizes.pop_back();
}

}  // namespace

void DPMState::validate() const {
  check(cluster_sigmas.size() == cluster_sizes.size(),
        "cluster bookkeeping out of sync");
  std::vector<int> counts(n_clusters(), 0);
  for (int a : assignments) {
    check(a >= 0 && a < n_clusters(), "assignment out of range");
    ++counts[a];
  }
  for (int c = 0; c < n_clusters(); ++c) {
    check(counts[c] == cluster_sizes[c], "cluster size mismatch");
    check(counts[c] > 0, "empty active cluster");
    check(is_spd2(cluster_sigmas[c]), "cluster covariance not SPD");
  }
  check(alpha > 0.0, "alpha must be positive");
}

DPMState init_dpm(const Mat& errors, const DPMHyper& hyper, Rng& rng) {
  check(errors.cols() == 2 && errors.rows() >= 1, "errors must be n x 2");
  DPMState state;
  const int n = static_cast<int>(errors.rows());
  state.assignments.assign(n, 0);
  state.cluster_sizes = {n};
  Mat2 scatter = Mat2::Zero();
  for (int i = 0; i < n; ++i) {
    const Vec2 e = errors.row(i).transpose();
    scatter += e * e.transpose();
  }
  state.cluster_sigmas = {draw_inv_wishart2(
      hyper.base.dof + n, hyper.base.scale + scatter, rng)};
  state.alpha = hyper.alpha_shape / hyper.alpha_rate;
  return state;
}

double log_new_cluster_marginal(const Vec2& eps, const IWPrior& base) {
  const double dof = base.dof - 1.0;
  return log_mvt2(eps, base.scale / dof, dof);
}

void assignment_sweep(const Mat& errors, DPMState& state, const IWPrior& base,
                      Rng& rng) {
  const int n = static_cast<int>(errors.rows());
  std::vector<double> logw;
  for (int i = 0; i < n; ++i) {
    const int old = state.assignments[i];
    if (--state.cluster_sizes[old] == 0) remove_cluster(state, old);

    const Vec2 e = errors.row(i).transpose();
    const int k = state.n_clusters();
    logw.assign(k + 1, 0.0);
    for (int c = 0; c < k; ++c)
      logw[c] = std::log(static_cast<double>(state.cluster_sizes[c])) +
                log_mvn2(e, state.cluster_sigmas[c]);
    logw[k] = std::log(state.alpha) + log_new_cluster_marginal(e, base);

    const int pick = static_cast<int>(rng.categorical_log(logw));
    if (pick == k) {
      state.cluster_sigmas.push_back(draw_inv_wishart2(
          base.dof + 1.0, base.scale + e * e.transpose(), rng));
      state.cluster_sizes.push_back(1);
    } else {
      ++state.cluster_sizes[pick];
    }
    state.assignments[i] = pick;
  }
}

void cluster_param_sweep(const Mat& errors, DPMState& state,
                         const IWPrior& base, Rng& rng) {
  for (int c = 0; c < state.n_clusters(); ++c) {
    const Mat2 scatter = scatter_of_cluster(errors, state.assignments, c);
    state.cluster_sigmas[c] = draw_inv_wishart2(
        base.dof + static_cast<double>(state.cluster_sizes[c]),
        base.scale + scatter, rng);
  }
}

double alpha_update(int n_clusters, int n_obs, double alpha,
                    const DPMHyper& hyper, Rng& rng) {
  if (!hyper.update_alpha) return alpha;
  const double a = hyper.alpha_shape;
  const double b = hyper.alpha_rate;
  const double k = static_cast<double>(n_clusters);
  const double n = static_cast<double>(n_obs);
  const double eta = rng.beta(alpha + 1.0, n);
  const double rate = b - std::log(eta);
  const double odds = (a + k - 1.0) / (n * rate);
  const double shape = rng.uniform() < odds / (1.0 + odds) ? a + k : a + k - 1.0;
  return rng.gamma(shape, 1.0 / rate);
}

Vec rho_per_obs(const DPMState& state) {
  Vec rho(state.assignments.size());
  for (size_t i = 0; i < state.assignments.size(); ++i) {
    const Mat2& s = state.cluster_sigmas[state.assignments[i]];
    rho(i) = s(0, 1) / std::sqrt(s(0, 0) * s(1, 1));
  }
  return rho;
}

}  // namespace ivbart
