#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ivbart/dpm.hpp"
#include "ivbart/ensemble.hpp"

namespace ivbart {

enum class Variant { NpivBartH, NpivBartG, IvBartH, IvBartG, PlainBart };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

enum class ErrorModel { BivariateNormal, Dpm };

struct ModelSpec {
  Variant variant = Variant::NpivBartH;
  ErrorModel error_model = ErrorModel::BivariateNormal;
  double k_stage1 = 2.0;
  double k_stage2 = 2.0;
  int h_t = 200;  // trees in f1
  int h_y = 200;  // trees in each f2 ensemble
  int numcut = 100;
  TreePriorConfig tree_prior;
  // likelihood tempering; 0 turns the sampler into a prior sampler
  double likelihood_weight = 1.0;
  // freeze the error covariance at its initialization (test hook)
  bool fixed_sigma = false;
  // DPM concentration prior; update_alpha=false pins alpha at alpha_init
  double alpha_shape = 2.0;
  double alpha_rate = 2.0;
  bool update_alpha = true;
  double alpha_init = 1.0;
  // plain-BART residual-variance prior: nu and the calibration quantile q
  double sigma_nu = 3.0;
  double sigma_q = 0.9;
};

struct McmcConfig {
  int burn_in = 5000;
  int draws = 5000;  // retained per chain
  int chains = 3;
  int thin = 1;      // no thinning by default
  std::uint64_t seed = 0;
};

struct IVData {
  Vec y;
  Vec t;
  Mat z;  // instruments
  Mat x;  // exogenous covariates; column 0 is the effect-modifier x1
};

struct EvalPoint {
  double t = 0.0;
  double x1 = 0.0;
};

// One retained Gibbs state, reduced to reportable quantities.
struct DrawRecord {
  int chain = 0;
  int iteration = 0;  // retained-draw index within its chain
  Vec grid_f2;        // partial-dependence value of f2 at each eval point
  double beta = std::numeric_limits<double>::quiet_NaN();  // ivBART-g only
  double rho_bar = 0.0;   // mean over observations of rho_i
  int n_clusters = 1;
  double sigma_t = 0.0;   // sqrt of sigma_tt (mean over observations)
  double sigma_y = 0.0;   // sqrt of sigma_yy (mean over observations)
  double log_density = 0.0;  // joint error log-likelihood at this state
};

struct PosteriorDraws {
  std::string schema = kSchemaVersion;
  std::uint64_t seed = 0;
  int chains = 0;
  std::vector<EvalPoint> grid;
  std::vector<bool> extrapolated;  // grid t outside the observed range
  std::vector<DrawRecord> records; // chain-major, iteration order inside
  Mat rho_i_mean;                  // chains x n: per-observation posterior
                                   // mean of rho_i within each chain
  double y_mean = 0.0;             // centering constant added back into PD
  double t_mean = 0.0;
};

// --- pseudo-outcome construction -------------------------------------------

// Conditional stage-1 target and variance for one observation:
//   t* = t - (s_ty/s_yy) (y - f2),   v = s_tt - s_ty^2 / s_yy
std::pair<double, double> stage1_pseudo_outcome(double t, double y, double f1,
                                                double f2, const Mat2& sigma);

// Conditional stage-2 target and variance:
//   y* = y - (s_ty/s_tt) (t - f1),   w = s_yy - s_ty^2 / s_tt
std::pair<double, double> stage2_pseudo_outcome(double t, double y, double f1,
                                                const Mat2& sigma);

// --- conjugate updates ------------------------------------------------------

// Draw from InverseWishart(nu0 + weight*n, S0 + weight * scatter(errors)).
Mat2 update_sigma_iw(const Mat& errors, const IWPrior& prior, Rng& rng,
                     double weight = 1.0);

// Conjugate normal draw for the global slope of ivBART-g.
double update_beta(const Vec& resid, const Vec& t, const Vec& w,
                   double sigma_beta, Rng& rng, double weight = 1.0);

// --- fitting ----------------------------------------------------------------

PosteriorDraws fit(const IVData& data, const ModelSpec& spec,
                   const McmcConfig& mcmc, const std::vector<EvalPoint>& grid,
                   int n_threads = 1);

// Per-gridpoint posterior summary of the stored PD evaluations.
struct PdSummary {
  std::vector<EvalPoint> grid;
  Vec mean;
  Vec lo;  // 2.5 percentile
  Vec hi;  // 97.5 percentile
  std::vector<bool> extrapolated;
};

PdSummary partial_dependence(const PosteriorDraws& draws);

// rho averages, both within chain: rho_bar_d per retained draw, and
// rho_bar_i per observation (rows of PosteriorDraws::rho_i_mean).
struct RhoDiagnostics {
  std::vector<int> chain;  // chain of each retained draw
  Vec rho_bar_d;           // one entry per retained draw
  Mat rho_bar_i;           // chains x n
};

RhoDiagnostics rho_diagnostics(const PosteriorDraws& draws);

}  // namespace ivbart
