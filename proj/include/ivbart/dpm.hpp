#pragma once

#include <vector>

#include "ivbart/common.hpp"
#include "ivbart/rng.hpp"

namespace ivbart {

// Inverse-Wishart prior/base measure on 2x2 covariances.
struct IWPrior {
  double dof = 6.0;
  Mat2 scale = Mat2::Identity();
};

struct DPMHyper {
  double alpha_shape = 2.0;  // Gamma prior on the concentration, shape
  double alpha_rate = 2.0;   // and rate
  bool update_alpha = true;  // disable to pin alpha at its current value
  IWPrior base;
};

// Mixture of zero-mean bivariate normals over the error pairs; only the
// covariances vary across clusters.
struct DPMState {
  std::vector<int> assignments;      // cluster id per observation
  std::vector<Mat2> cluster_sigmas;  // one SPD matrix per active cluster
  std::vector<int> cluster_sizes;
  double alpha = 1.0;

  int n_clusters() const { return static_cast<int>(cluster_sigmas.size()); }
  // checks the partition invariants; throws on violation
  void validate() const;
};

// all observations in one cluster drawn from its posterior
DPMState init_dpm(const Mat& errors, const DPMHyper& hyper, Rng& rng);

// log of  t_2(eps; 0, S0/(nu0-1), nu0-1) = integral N2(eps; 0, S) IW(S) dS
double log_new_cluster_marginal(const Vec2& eps, const IWPrior& base);

// One collapsed-Gibbs pass over observations: each point joins an existing
// cluster with probability proportional to its size times the component
// density, or opens a new cluster with probability proportional to
// alpha times the prior-predictive density.
void assignment_sweep(const Mat& errors, DPMState& state, const IWPrior& base,
                      Rng& rng);

// Conjugate refresh of every active cluster covariance.
void cluster_param_sweep(const Mat& errors, DPMState& state,
                         const IWPrior& base, Rng& rng);

// Escobar-West auxiliary-variable update of the concentration parameter.
double alpha_update(int n_clusters, int n_obs, double alpha,
                    const DPMHyper& hyper, Rng& rng);

// per-observation correlation implied by the assigned cluster covariance
Vec rho_per_obs(const DPMState& state);

}  // namespace ivbart
