#include "ivbart/simlab.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>

#include <Eigen/Cholesky>

#include "ivbart/io.hpp"
#include "ivbart/stats.hpp"
#include "ivbart/tsls.hpp"

namespace ivbart {

namespace {

constexpr std::uint64_t kTagDataset = 0xDA7A;
constexpr std::uint64_t kTagScenario = 0x5CE0;
constexpr std::uint64_t kTagFit = 0xF17;

std::string unit_path(const std::string& dir, int si, int mi, int rep) {
  return dir + "/units/s" + std::to_string(si) + "_m" + std::to_string(mi) +
         "_r" + std::to_string(rep) + ".json";
}

}  // namespace

std::string truth_name(Truth t) {
  switch (t) {
    case Truth::LinearG: return "linear-g";
    case Truth::NonlinearG: return "nonlinear-g";
    case Truth::LinearH: return "linear-h";
    case Truth::NonlinearH: return "nonlinear-h";
  }
  return "?";
}

Truth truth_from_name(const std::string& name) {
  if (name == "linear-g") return Truth::LinearG;
  if (name == "nonlinear-g") return Truth::NonlinearG;
  if (name == "linear-h") return Truth::LinearH;
  if (name == "nonlinear-h") return Truth::NonlinearH;
  throw std::runtime_error("unknown truth: " + name);
}

GenotypeModel GenotypeModel::default_model(int n_snps) {
  check(n_snps >= 1, "need at least one SNP");
  GenotypeModel m;
  m.allele_freqs = Vec(n_snps);
  for (int j = 0; j < n_snps; ++j)
    m.allele_freqs(j) =
        n_snps == 1 ? 0.3
                    : 0.15 + 0.30 * static_cast<double>(j) /
                                 static_cast<double>(n_snps - 1);
  m.latent_corr = Mat(n_snps, n_snps);
  for (int i = 0; i < n_snps; ++i)
    for (int j = 0; j < n_snps; ++j)
      m.latent_corr(i, j) = std::pow(0.6, std::abs(i - j));
  return m;
}

std::vector<EvalPoint> EvalGrid::points() const {
  std::vector<EvalPoint> out;
  for (double t : t_points)
    for (double x1 : x1_points) out.push_back({t, x1});
  return out;
}

double friedman_f1(const Vec& z) {
  check(z.size() >= 5, "friedman_f1 needs at least five coordinates");
  return std::sin(M_PI * z(0) * z(1)) + 2.0 * z(2) * z(2) + z(3) + 0.5 * z(4);
}

Vec standardize_signal(const Vec& values, double c) {
  check(c >= 0.0, "signal scale must be nonnegative");
  if (c == 0.0) return Vec::Zero(values.size());
  check(values.size() >= 2, "standardize_signal needs at least two values");
  const double m = values.mean();
  const double sd = std::sqrt((values.array() - m).square().sum() /
                              static_cast<double>(values.size() - 1));
  check(sd > 0.0, "cannot standardize a constant signal");
  return c * (values.array() - m) / sd;
}

double true_f2(Truth truth, double t, double x1) {
  const double ind = x1 >= 0.0 ? 1.0 : 0.0;
  switch (truth) {
    case Truth::LinearG: return t + ind;
    case Truth::NonlinearG: return std::cos(t) + ind;
    case Truth::LinearH: return t * ind;
    case Truth::NonlinearH: return std::cos(t) * ind;
  }
  return 0.0;
}

Mat simulate_genotypes(int n, const GenotypeModel& model, Rng& rng) {
  const int p = static_cast<int>(model.allele_freqs.size());
  check(model.latent_corr.rows() == p && model.latent_corr.cols() == p,
        "latent correlation size mismatch");
  Eigen::LLT<Mat> llt(model.latent_corr);
  check(llt.info() == Eigen::Success, "latent correlation is not SPD");
  const Mat chol = llt.matrixL();

  Vec lo(p), hi(p);
  for (int j = 0; j < p; ++j) {
    const double f = model.allele_freqs(j);
    check(f > 0.0 && f < 1.0, "allele frequency must be in (0,1)");
    // Hardy-Weinberg genotype probabilities under minor-allele frequency f
    lo(j) = norm_quantile((1.0 - f) * (1.0 - f));
    hi(j) = norm_quantile((1.0 - f) * (1.0 - f) + 2.0 * f * (1.0 - f));
  }

  Mat z(n, p);
  Vec u(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) u(j) = rng.normal();
    const Vec latent = chol * u;
    for (int j = 0; j < p; ++j)
      z(i, j) = latent(j) < lo(j) ? 0.0 : latent(j) < hi(j) ? 1.0 : 2.0;
  }
  return z;
}

IVData generate_dataset(const SimScenario& sc, int rep_index) {
  check(sc.n >= 2 && sc.n_snps >= 5 && sc.n_x >= 1, "scenario too small");
  check(std::abs(sc.rho) < 1.0, "|rho| must be < 1");
  Rng rng(derive_seed(sc.seed, {kTagDataset, std::uint64_t(rep_index)}));

  IVData d;
  d.z = simulate_genotypes(sc.n, GenotypeModel::default_model(sc.n_snps), rng);

  // Friedman signal on genotype codes rescaled to [0,1]
  Vec f1_raw(sc.n);
  for (int i = 0; i < sc.n; ++i)
    f1_raw(i) = friedman_f1(d.z.row(i).transpose() / 2.0);
  const Vec signal = standardize_signal(f1_raw, sc.c_signal);

  d.x = Mat(sc.n, sc.n_x);
  for (int i = 0; i < sc.n; ++i)
    for (int j = 0; j < sc.n_x; ++j) d.x(i, j) = rng.uniform(-1.0, 1.0);

  d.t = Vec(sc.n);
  d.y = Vec(sc.n);
  const double mix = std::sqrt(1.0 - sc.rho * sc.rho);
  for (int i = 0; i < sc.n; ++i) {
    const double et = rng.normal();
    const double ey = sc.rho * et + mix * rng.normal();
    d.t(i) = signal(i) + et;
    d.y(i) = true_f2(sc.truth, d.t(i), d.x(i, 0)) + ey;
  }
  return d;
}

RepEvaluation evaluate_replication(const PosteriorDraws& draws,
                                   const SimScenario& scenario) {
  const PdSummary pd = partial_dependence(draws);
  RepEvaluation ev;
  ev.grid = pd.grid;
  ev.bias = Vec(pd.grid.size());
  double sq_neg = 0.0, sq_pos = 0.0;
  int n_neg = 0, n_pos = 0;
  for (size_t g = 0; g < pd.grid.size(); ++g) {
    ev.bias(g) =
        pd.mean(g) - true_f2(scenario.truth, pd.grid[g].t, pd.grid[g].x1);
    if (pd.grid[g].x1 < 0.0) {
      sq_neg += ev.bias(g) * ev.bias(g);
      ++n_neg;
    } else {
      sq_pos += ev.bias(g) * ev.bias(g);
      ++n_pos;
    }
  }
  ev.rmse_neg = n_neg > 0 ? std::sqrt(sq_neg / n_neg) : 0.0;
  ev.rmse_pos = n_pos > 0 ? std::sqrt(sq_pos / n_pos) : 0.0;

  std::vector<double> betas;
  for (const DrawRecord& rec : draws.records)
    if (!std::isnan(rec.beta)) betas.push_back(rec.beta);
  if (!betas.empty()) {
    ev.beta = mean(betas);
    ev.has_beta = true;
  }
  return ev;
}

namespace {

nlohmann::json compute_unit(const StudyConfig& cfg, int si, int mi, int rep) {
  SimScenario sc = cfg.scenarios[si];
  sc.seed = derive_seed(cfg.seed, {kTagScenario, std::uint64_t(si)});
  const IVData data = generate_dataset(sc, rep);
  const StudyMethod& method = cfg.methods[mi];

  nlohmann::json unit;
  unit["schema"] = kSchemaVersion;
  unit["scenario"] = si;
  unit["method"] = method.name;
  unit["rep"] = rep;

  if (method.is_tsls) {
    const TSLSFit fit2 = fit_2sls(data.y, data.t, data.z, data.x);
    unit["beta"] = fit2.beta_hat;
    unit["se_beta"] = fit2.se_beta;
    unit["first_stage_F"] =
        fit2.f_infinite ? nlohmann::json() : nlohmann::json(fit2.first_stage_F);
    return unit;
  }

  McmcConfig mc = cfg.mcmc;
  mc.seed = derive_seed(cfg.seed, {kTagFit, std::uint64_t(si),
                                   std::uint64_t(mi), std::uint64_t(rep)});
  const PosteriorDraws draws =
      fit(data, method.spec, mc, cfg.grid.points(), 1);
  const RepEvaluation ev = evaluate_replication(draws, sc);

  nlohmann::json grid = nlohmann::json::array();
  for (const EvalPoint& g : ev.grid) grid.push_back({g.t, g.x1});
  unit["grid"] = std::move(grid);
  unit["bias"] =
      std::vector<double>(ev.bias.data(), ev.bias.data() + ev.bias.size());
  unit["rmse_neg"] = ev.rmse_neg;
  unit["rmse_pos"] = ev.rmse_pos;
  if (ev.has_beta)
    unit["beta"] = ev.beta;
  else
    unit["beta"] = nullptr;
  return unit;
}

struct Accum {
  std::vector<double> vals;
  void add(double x) { vals.push_back(x); }
  double mu() const { return mean(vals); }
  double sd() const { return sample_sd(vals); }
  int n() const { return static_cast<int>(vals.size()); }
};

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  namespace fs = std::filesystem;
  check(!cfg.output_dir.empty(), "study needs an output directory");
  check(cfg.mcmc.chains >= 1, "study needs chains >= 1");
  fs::create_directories(fs::path(cfg.output_dir) / "units");

  const int ns = static_cast<int>(cfg.scenarios.size());
  const int nm = static_cast<int>(cfg.methods.size());

  struct UnitKey {
    int si, mi, rep;
  };
  std::vector<UnitKey> todo;
  int units_total = 0;
  for (int si = 0; si < ns; ++si)
    for (int mi = 0; mi < nm; ++mi)
      for (int rep = 0; rep < cfg.scenarios[si].replications; ++rep) {
        ++units_total;
        const std::string path = unit_path(cfg.output_dir, si, mi, rep);
        if (cfg.resume && fs::exists(path)) continue;
        todo.push_back({si, mi, rep});
      }

  std::atomic<int> started{0};
  std::atomic<int> computed{0};
  const int budget = cfg.max_units >= 0 ? cfg.max_units
                                        : static_cast<int>(todo.size());
  const int workers = std::max(1, cfg.parallel);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) \
    if (workers > 1)
  for (size_t u = 0; u < todo.size(); ++u) {
    if (started.fetch_add(1) >= budget) continue;
    const UnitKey k = todo[u];
    const nlohmann::json unit = compute_unit(cfg, k.si, k.mi, k.rep);
    write_text_atomic(unit_path(cfg.output_dir, k.si, k.mi, k.rep),
                      unit.dump() + "\n");
    computed.fetch_add(1);
  }

  // aggregate from the unit files so fresh, resumed, and partial runs all
  // reduce the identical byte stream
  StudyReport report;
  report.units_total = units_total;
  report.units_computed = computed.load();
  report.complete = true;

  const std::vector<EvalPoint> grid = cfg.grid.points();
  const int ng = static_cast<int>(grid.size());

  for (int si = 0; si < ns; ++si) {
    for (int mi = 0; mi < nm; ++mi) {
      std::vector<Accum> bias_acc(ng);
      Accum rmse_neg, rmse_pos, beta_acc;
      bool any_bias = false;
      for (int rep = 0; rep < cfg.scenarios[si].replications; ++rep) {
        const std::string path = unit_path(cfg.output_dir, si, mi, rep);
        if (!fs::exists(path)) {
          report.complete = false;
          continue;
        }
        const nlohmann::json unit = nlohmann::json::parse(read_text(path));
        check(unit.at("schema").get<std::string>() == kSchemaVersion,
              path + ": schema mismatch");
        if (unit.contains("bias")) {
          const auto bias = unit.at("bias").get<std::vector<double>>();
          check(static_cast<int>(bias.size()) == ng,
                path + ": grid size mismatch");
          for (int g = 0; g < ng; ++g) bias_acc[g].add(bias[g]);
          rmse_neg.add(unit.at("rmse_neg").get<double>());
          rmse_pos.add(unit.at("rmse_pos").get<double>());
          any_bias = true;
        }
        if (unit.contains("beta") && !unit.at("beta").is_null())
          beta_acc.add(unit.at("beta").get<double>());
      }
      const std::string& name = cfg.methods[mi].name;
      if (any_bias && ng > 0) {
        for (int g = 0; g < ng; ++g)
          report.bias.push_back({si, name, grid[g].t, grid[g].x1,
                                 bias_acc[g].mu(), bias_acc[g].sd(),
                                 bias_acc[g].n()});
        for (double x1 : {-0.5, 0.5}) {
          const Accum& a = x1 < 0 ? rmse_neg : rmse_pos;
          report.rmse.push_back({si, name, x1, a.mu(), a.sd(), a.n()});
        }
      }
      if (beta_acc.n() > 0)
        report.beta.push_back(
            {si, name, beta_acc.mu(), beta_acc.sd(), beta_acc.n()});
    }
  }

  // provenance comments shared by the three tables
  std::vector<std::string> comments = {
      "study: " + cfg.name, "seed: " + std::to_string(cfg.seed),
      "schema: " + std::string(kSchemaVersion)};
  for (int si = 0; si < ns; ++si) {
    const SimScenario& sc = cfg.scenarios[si];
    comments.push_back(
        "scenario " + std::to_string(si) + ": truth=" + truth_name(sc.truth) +
        " rho=" + format_double(sc.rho) + " C=" + format_double(sc.c_signal) +
        " n=" + std::to_string(sc.n) +
        " reps=" + std::to_string(sc.replications));
  }

  std::vector<std::vector<std::string>> rows;
  for (const BiasRow& r : report.bias)
    rows.push_back({std::to_string(r.scenario), r.method, format_double(r.t),
                    format_double(r.x1), format_double(r.mean_bias),
                    format_double(r.sd_bias), std::to_string(r.reps)});
  write_csv(cfg.output_dir + "/bias_by_gridpoint.csv", comments,
            {"scenario", "method", "t", "x1", "mean_bias", "sd_bias", "reps"},
            rows);

  rows.clear();
  for (const RmseRow& r : report.rmse)
    rows.push_back({std::to_string(r.scenario), r.method, format_double(r.x1),
                    format_double(r.mean_rmse), format_double(r.sd_rmse),
                    std::to_string(r.reps)});
  write_csv(cfg.output_dir + "/rmse_table.csv", comments,
            {"scenario", "method", "x1", "mean_rmse", "sd_rmse", "reps"},
            rows);

  rows.clear();
  for (const BetaRow& r : report.beta)
    rows.push_back({std::to_string(r.scenario), r.method,
                    format_double(r.mean_beta), format_double(r.sd_beta),
                    std::to_string(r.reps)});
  write_csv(cfg.output_dir + "/beta_table.csv", comments,
            {"scenario", "method", "mean_beta", "sd_beta", "reps"}, rows);

  nlohmann::json manifest;
  manifest["schema"] = kSchemaVersion;
  manifest["study"] = cfg.name;
  manifest["seed"] = cfg.seed;
  manifest["units_total"] = units_total;
  manifest["complete"] = report.complete;
  manifest["mcmc"] = {{"burn_in", cfg.mcmc.burn_in},
                      {"draws", cfg.mcmc.draws},
                      {"chains", cfg.mcmc.chains},
                      {"thin", cfg.mcmc.thin}};
  nlohmann::json scen = nlohmann::json::array();
  for (const SimScenario& sc : cfg.scenarios)
    scen.push_back({{"truth", truth_name(sc.truth)},
                    {"rho", sc.rho},
                    {"c", sc.c_signal},
                    {"n", sc.n},
                    {"n_snps", sc.n_snps},
                    {"n_x", sc.n_x},
                    {"replications", sc.replications}});
  manifest["scenarios"] = std::move(scen);
  nlohmann::json meth = nlohmann::json::array();
  for (const StudyMethod& m : cfg.methods) meth.push_back(m.name);
  manifest["methods"] = std::move(meth);
  write_text_atomic(cfg.output_dir + "/manifest.json",
                    manifest.dump(2) + "\n");
  return report;
}

}  // namespace ivbart
