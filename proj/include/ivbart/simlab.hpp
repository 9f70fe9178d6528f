#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ivbart/ivmodels.hpp"
#include "ivbart/rng.hpp"

namespace ivbart {

enum class Truth { LinearG, NonlinearG, LinearH, NonlinearH };

std::string truth_name(Truth t);
Truth truth_from_name(const std::string& name);

// Correlated-SNP generator: latent Gaussian copula thresholded at the
// Hardy-Weinberg quantiles of each minor-allele frequency.
struct GenotypeModel {
  Vec allele_freqs;  // in (0,1)
  Mat latent_corr;   // SPD, unit diagonal

  // n_snps frequencies spread over [0.15, 0.45] with AR(1) latent
  // correlation 0.6 — a stand-in for a gene-sized LD block
  static GenotypeModel default_model(int n_snps);
};

struct SimScenario {
  Truth truth = Truth::NonlinearH;
  double rho = 0.7;       // error correlation
  double c_signal = 1.0;  // stage-1 signal scale C
  int n = 1000;
  int n_snps = 20;
  int n_x = 10;
  int replications = 1000;
  std::uint64_t seed = 0;
};

struct EvalGrid {
  std::vector<double> t_points = {-2.5, -1.25, 0.0, 1.25, 2.5};
  std::vector<double> x1_points = {-0.5, 0.5};
  std::vector<EvalPoint> points() const;
};

// sin(pi z1 z2) + 2 z3^2 + z4 + 0.5 z5; coordinates beyond the fifth ignored
double friedman_f1(const Vec& z);

// C * (values - mean) / sd, so the output has sample variance C^2
Vec standardize_signal(const Vec& values, double c);

double true_f2(Truth truth, double t, double x1);

// n x p matrix of genotype codes {0,1,2}
Mat simulate_genotypes(int n, const GenotypeModel& model, Rng& rng);

// One replication's dataset; the stream depends only on (seed, rep_index), so
// every method sees the same data and reruns are byte-identical.
IVData generate_dataset(const SimScenario& scenario, int rep_index);

struct RepEvaluation {
  std::vector<EvalPoint> grid;
  Vec bias;              // PD mean minus truth, per grid point
  double rmse_neg = 0.0; // across t points at x1 = -0.5
  double rmse_pos = 0.0; // across t points at x1 = +0.5
  double beta = std::numeric_limits<double>::quiet_NaN();
  bool has_beta = false;
};

RepEvaluation evaluate_replication(const PosteriorDraws& draws,
                                   const SimScenario& scenario);

// A study crosses scenarios with methods; "2SLS" is the frequentist baseline,
// all other methods are MCMC fits of the named variant.
struct StudyMethod {
  std::string name;  // table label, e.g. "npivBART-h" or "2SLS"
  bool is_tsls = false;
  ModelSpec spec;
};

struct StudyConfig {
  std::string name = "study";
  std::vector<SimScenario> scenarios;
  std::vector<StudyMethod> methods;
  McmcConfig mcmc;  // per-fit sizes; chains usually 1 at desk scale
  EvalGrid grid;
  std::string output_dir;
  std::uint64_t seed = 0;
  int parallel = 1;
  bool resume = false;
  // stop after this many newly computed units (interruption hook for tests)
  int max_units = -1;
};

struct BiasRow {
  int scenario = 0;
  std::string method;
  double t = 0.0, x1 = 0.0;
  double mean_bias = 0.0, sd_bias = 0.0;
  int reps = 0;
};

struct RmseRow {
  int scenario = 0;
  std::string method;
  double x1 = 0.0;
  double mean_rmse = 0.0, sd_rmse = 0.0;
  int reps = 0;
};

struct BetaRow {
  int scenario = 0;
  std::string method;
  double mean_beta = 0.0, sd_beta = 0.0;
  int reps = 0;
};

struct StudyReport {
  std::vector<BiasRow> bias;
  std::vector<RmseRow> rmse;
  std::vector<BetaRow> beta;
  int units_total = 0;
  int units_computed = 0;  // newly computed in this invocation
  bool complete = false;
};

// Runs (or resumes) the study, writing one JSON unit file per
// (scenario, method, replication) plus bias_by_gridpoint.csv, rmse_table.csv,
// beta_table.csv and manifest.json under config.output_dir.
StudyReport run_study(const StudyConfig& config);

}  // namespace ivbart
