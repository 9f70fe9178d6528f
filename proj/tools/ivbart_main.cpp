// ivbart command-line driver: fit | simulate | summarize

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivbart/io.hpp"
#include "ivbart/ivmodels.hpp"
#include "ivbart/simlab.hpp"
#include "ivbart/stats.hpp"
#include "ivbart/svg.hpp"

namespace {

using namespace ivbart;

std::vector<std::string> provenance(std::uint64_t seed,
                                    std::uint64_t cfg_hash) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(cfg_hash));
  return {"schema: " + std::string(kSchemaVersion),
          "seed: " + std::to_string(seed), "config: " + std::string(hash)};
}

std::string svg_provenance(std::uint64_t seed, std::uint64_t cfg_hash) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(cfg_hash));
  return "<!-- schema: " + std::string(kSchemaVersion) +
         "; seed: " + std::to_string(seed) + "; config: " + hash + " -->\n";
}

Vec pick_column(const Csv& csv, const std::string& name) {
  const int c = csv.col_required(name);
  Vec out(csv.rows.size());
  for (size_t i = 0; i < csv.rows.size(); ++i) out(i) = csv.rows[i][c];
  return out;
}

void check_finite(const Vec& v, const std::string& name) {
  for (int i = 0; i < v.size(); ++i)
    check(std::isfinite(v(i)), "column '" + name + "' row " +
                                   std::to_string(i + 1) +
                                   ": non-finite value");
}

int cmd_fit(const std::string& config_path, bool seed_set, std::uint64_t seed,
            const std::string& output_override, int parallel) {
  const nlohmann::json j = nlohmann::json::parse(read_text(config_path));
  FitConfig fc = parse_fit_config(j);
  if (seed_set) fc.mcmc.seed = seed;
  if (!output_override.empty()) fc.output_dir = output_override;
  const std::uint64_t cfg_hash = config_hash(j);

  const Csv csv = read_csv(fc.data_path);
  IVData data;
  data.y = pick_column(csv, fc.outcome);
  data.t = pick_column(csv, fc.exposure);
  check_finite(data.y, fc.outcome);
  check_finite(data.t, fc.exposure);
  data.z = Mat(csv.rows.size(), fc.instruments.size());
  for (size_t k = 0; k < fc.instruments.size(); ++k) {
    const Vec col = pick_column(csv, fc.instruments[k]);
    check_finite(col, fc.instruments[k]);
    data.z.col(k) = col;
  }
  data.x = Mat(csv.rows.size(), fc.covariates.size());
  for (size_t k = 0; k < fc.covariates.size(); ++k) {
    const Vec col = pick_column(csv, fc.covariates[k]);
    check_finite(col, fc.covariates[k]);
    data.x.col(k) = col;
  }

  const std::vector<EvalPoint> grid = fc.grid.points();
  const PosteriorDraws draws = fit(data, fc.spec, fc.mcmc, grid, parallel);

  std::filesystem::create_directories(fc.output_dir);
  const auto comments = provenance(fc.mcmc.seed, cfg_hash);
  write_draws(fc.output_dir + "/draws.jsonl", draws, cfg_hash);

  // partial-dependence summary: one row per grid point
  const PdSummary pd = partial_dependence(draws);
  std::vector<std::vector<std::string>> rows;
  for (size_t g = 0; g < pd.grid.size(); ++g)
    rows.push_back({format_double(pd.grid[g].t), format_double(pd.grid[g].x1),
                    format_double(pd.mean(g)), format_double(pd.lo(g)),
                    format_double(pd.hi(g)),
                    pd.extrapolated[g] ? "1" : "0"});
  write_csv(fc.output_dir + "/pd_summary.csv", comments,
            {"t", "x1", "mean", "lo", "hi", "extrapolated"}, rows);

  SvgPlot pd_plot;
  pd_plot.title = "partial dependence of f2";
  pd_plot.xlabel = "t";
  pd_plot.ylabel = "f2";
  if (!draws.records.empty()) {
    std::vector<double> x1s;
    for (const EvalPoint& g : pd.grid)
      if (std::find(x1s.begin(), x1s.end(), g.x1) == x1s.end())
        x1s.push_back(g.x1);
    const std::vector<std::string> palette = {"#1f6fb2", "#c44e52", "#55a868",
                                              "#8172b2"};
    for (size_t i = 0; i < x1s.size(); ++i) {
      SvgSeries s;
      SvgBand b;
      s.color = b.color = palette[i % palette.size()];
      s.markers = true;
      s.label = "x1 = " + format_double(x1s[i]);
      for (size_t g = 0; g < pd.grid.size(); ++g) {
        if (pd.grid[g].x1 != x1s[i]) continue;
        s.x.push_back(pd.grid[g].t);
        s.y.push_back(pd.mean(g));
        b.x.push_back(pd.grid[g].t);
        b.lo.push_back(pd.lo(g));
        b.hi.push_back(pd.hi(g));
      }
      pd_plot.bands.push_back(std::move(b));
      pd_plot.series.push_back(std::move(s));
    }
  }
  write_text_atomic(fc.output_dir + "/pd_summary.svg",
                    svg_provenance(fc.mcmc.seed, cfg_hash) + pd_plot.render());

  // rho diagnostics: per-draw averages and per-observation posterior means
  const RhoDiagnostics rho = rho_diagnostics(draws);
  rows.clear();
  for (int d = 0; d < rho.rho_bar_d.size(); ++d)
    rows.push_back({std::to_string(rho.chain[d]),
                    format_double(rho.rho_bar_d(d)),
                    std::to_string(draws.records[d].n_clusters),
                    format_double(draws.records[d].sigma_t),
                    format_double(draws.records[d].sigma_y)});
  write_csv(fc.output_dir + "/rho_by_draw.csv", comments,
            {"chain", "rho_bar", "n_clusters", "sigma_t", "sigma_y"}, rows);
  SvgPlot rho_d_plot;
  rho_d_plot.title = "average error correlation per draw";
  rho_d_plot.xlabel = "rho_bar";
  rho_d_plot.ylabel = "draws";
  rho_d_plot.hist_values.assign(rho.rho_bar_d.data(),
                                rho.rho_bar_d.data() + rho.rho_bar_d.size());
  write_text_atomic(
      fc.output_dir + "/rho_by_draw.svg",
      svg_provenance(fc.mcmc.seed, cfg_hash) + rho_d_plot.render());

  rows.clear();
  const int n_obs = static_cast<int>(rho.rho_bar_i.cols());
  std::vector<double> rho_obs_pooled;
  std::vector<std::string> obs_cols = {"obs"};
  for (int c = 0; c < rho.rho_bar_i.rows(); ++c)
    obs_cols.push_back("rho_mean_chain" + std::to_string(c));
  obs_cols.push_back("rho_mean");
  for (int i = 0; i < n_obs; ++i) {
    std::vector<std::string> row = {std::to_string(i)};
    for (int c = 0; c < rho.rho_bar_i.rows(); ++c)
      row.push_back(format_double(rho.rho_bar_i(c, i)));
    const double pooled =
        rho.rho_bar_i.rows() > 0 ? rho.rho_bar_i.col(i).mean() : 0.0;
    row.push_back(format_double(pooled));
    rho_obs_pooled.push_back(pooled);
    rows.push_back(std::move(row));
  }
  write_csv(fc.output_dir + "/rho_by_obs.csv", comments, obs_cols, rows);
  SvgPlot rho_i_plot;
  rho_i_plot.title = "posterior mean error correlation per observation";
  rho_i_plot.xlabel = "rho_i posterior mean";
  rho_i_plot.ylabel = "observations";
  if (!draws.records.empty()) rho_i_plot.hist_values = rho_obs_pooled;
  write_text_atomic(
      fc.output_dir + "/rho_by_obs.svg",
      svg_provenance(fc.mcmc.seed, cfg_hash) + rho_i_plot.render());

  std::cout << "fit complete: " << draws.records.size() << " draws over "
            << draws.chains << " chain(s); outputs in " << fc.output_dir
            << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, bool seed_set,
                 std::uint64_t seed, const std::string& output_override,
                 bool parallel_set, int parallel, bool resume,
                 int max_units) {
  const nlohmann::json j = nlohmann::json::parse(read_text(config_path));
  StudyConfig sc = parse_study_config(j);
  if (seed_set) sc.seed = seed;
  if (!output_override.empty()) sc.output_dir = output_override;
  if (parallel_set) sc.parallel = parallel;
  sc.resume = resume;
  sc.max_units = max_units;

  const StudyReport report = run_study(sc);
  std::cout << "study '" << sc.name << "': " << report.units_computed
            << " unit(s) computed, " << report.units_total << " total, "
            << (report.complete ? "complete" : "INCOMPLETE") << "\n";
  std::cout << "tables in " << sc.output_dir << "\n";
  for (const RmseRow& r : report.rmse)
    std::cout << "  rmse scenario=" << r.scenario << " method=" << r.method
              << " x1=" << format_double(r.x1) << " mean="
              << format_double(r.mean_rmse) << "\n";
  for (const BetaRow& r : report.beta)
    std::cout << "  beta scenario=" << r.scenario << " method=" << r.method
              << " mean=" << format_double(r.mean_beta) << "\n";
  return 0;
}

struct Summary {
  double mean = 0, sd = 0, p025 = 0, p50 = 0, p975 = 0;
};

Summary summarize_series(std::vector<double> v) {
  Summary s;
  s.mean = mean(v);
  s.sd = v.size() >= 2 ? sample_sd(v) : 0.0;
  s.p025 = percentile(v, 0.025);
  s.p50 = percentile(v, 0.50);
  s.p975 = percentile(v, 0.975);
  return s;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const size_t h = c.size() / 2;
    if (h == 0) continue;
    halves.emplace_back(c.begin(), c.begin() + h);
    halves.emplace_back(c.end() - h, c.end());
  }
  const size_t m = halves.size();
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const size_t n = halves[0].size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> mus;
  double w = 0.0;
  for (const auto& h : halves) {
    mus.push_back(mean(h));
    const double s = sample_sd(h);
    w += s * s;
  }
  w /= m;
  const double grand = mean(mus);
  double b = 0.0;
  for (double mu : mus) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1);
  if (w == 0.0)
    return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

int cmd_summarize(const std::string& draws_path,
                  const std::string& output_dir) {
  const PosteriorDraws draws = read_draws(draws_path);
  // the header line also carries the config hash for provenance stamping
  const std::string text = read_text(draws_path);
  const nlohmann::json header =
      nlohmann::json::parse(text.substr(0, text.find('\n')));
  const std::uint64_t cfg_hash =
      header.value("config_hash", std::uint64_t{0});

  struct Metric {
    std::string name;
    std::vector<std::vector<double>> per_chain;  // indexed by chain
  };
  std::vector<Metric> metrics = {{"beta", {}},      {"rho_bar", {}},
                                 {"n_clusters", {}}, {"sigma_t", {}},
                                 {"sigma_y", {}}};
  for (Metric& m : metrics) m.per_chain.resize(std::max(1, draws.chains));
  for (const DrawRecord& rec : draws.records) {
    if (!std::isnan(rec.beta)) metrics[0].per_chain[rec.chain].push_back(rec.beta);
    metrics[1].per_chain[rec.chain].push_back(rec.rho_bar);
    metrics[2].per_chain[rec.chain].push_back(rec.n_clusters);
    metrics[3].per_chain[rec.chain].push_back(rec.sigma_t);
    metrics[4].per_chain[rec.chain].push_back(rec.sigma_y);
  }

  nlohmann::json out;
  out["schema"] = kSchemaVersion;
  out["seed"] = draws.seed;
  out["config_hash"] = cfg_hash;
  std::vector<std::vector<std::string>> rows;
  std::printf("%-12s %-8s %10s %10s %10s %10s %10s %8s\n", "metric", "scope",
              "mean", "sd", "p2.5", "p50", "p97.5", "rhat");
  for (const Metric& m : metrics) {
    std::vector<double> pooled;
    for (const auto& c : m.per_chain)
      pooled.insert(pooled.end(), c.begin(), c.end());
    if (pooled.empty()) continue;
    const double rhat = split_rhat(m.per_chain);
    nlohmann::json jm;
    for (size_t c = 0; c < m.per_chain.size(); ++c) {
      if (m.per_chain[c].empty()) continue;
      const Summary s = summarize_series(m.per_chain[c]);
      const std::string scope = "chain" + std::to_string(c);
      rows.push_back({m.name, scope, format_double(s.mean),
                      format_double(s.sd), format_double(s.p025),
                      format_double(s.p50), format_double(s.p975), ""});
      jm[scope] = {{"mean", s.mean}, {"sd", s.sd},   {"p2.5", s.p025},
                   {"p50", s.p50},   {"p97.5", s.p975}};
      std::printf("%-12s %-8s %10.4f %10.4f %10.4f %10.4f %10.4f %8s\n",
                  m.name.c_str(), scope.c_str(), s.mean, s.sd, s.p025, s.p50,
                  s.p975, "");
    }
    const Summary s = summarize_series(pooled);
    rows.push_back({m.name, "pooled", format_double(s.mean),
                    format_double(s.sd), format_double(s.p025),
                    format_double(s.p50), format_double(s.p975),
                    format_double(rhat)});
    jm["pooled"] = {{"mean", s.mean}, {"sd", s.sd},   {"p2.5", s.p025},
                    {"p50", s.p50},   {"p97.5", s.p975}, {"rhat", rhat}};
    std::printf("%-12s %-8s %10.4f %10.4f %10.4f %10.4f %10.4f %8.3f\n",
                m.name.c_str(), "pooled", s.mean, s.sd, s.p025, s.p50, s.p975,
                rhat);
    out["metrics"][m.name] = std::move(jm);
  }

  if (!output_dir.empty()) {
    std::filesystem::create_directories(output_dir);
    write_csv(output_dir + "/summary.csv", provenance(draws.seed, cfg_hash),
              {"metric", "scope", "mean", "sd", "p2.5", "p50", "p97.5",
               "rhat"},
              rows);
    write_text_atomic(output_dir + "/summary.json", out.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian instrumental-variable regression with tree "
               "ensembles"};
  app.require_subcommand(1);

  std::string config_path, output_dir, draws_path;
  std::uint64_t seed = 0;
  int parallel = 1;
  int max_units = -1;
  bool resume = false;

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a model to CSV data");
  fit_cmd->add_option("--config", config_path, "JSON fit config")->required();
  CLI::Option* fit_seed = fit_cmd->add_option("--seed", seed,
                                              "override the master seed");
  fit_cmd->add_option("--output", output_dir, "override the output directory");
  fit_cmd->add_option("--parallel", parallel, "worker threads (chains)")
      ->envname("IVBART_PARALLEL");

  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "run or resume a simulation study");
  sim_cmd->add_option("--config", config_path, "JSON study config")
      ->required();
  CLI::Option* sim_seed = sim_cmd->add_option("--seed", seed,
                                              "override the master seed");
  sim_cmd->add_option("--output", output_dir, "override the output directory");
  CLI::Option* sim_par =
      sim_cmd->add_option("--parallel", parallel,
                          "worker threads (replications)")
          ->envname("IVBART_PARALLEL");
  sim_cmd->add_flag("--resume", resume, "reuse existing unit files");
  sim_cmd->add_option("--max-units", max_units,
                      "stop after computing this many units");

  CLI::App* sum_cmd =
      app.add_subcommand("summarize", "summarize a posterior draw file");
  sum_cmd->add_option("--draws", draws_path, "draws.jsonl path")->required();
  sum_cmd->add_option("--output", output_dir,
                      "directory for summary.csv / summary.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed())
      return cmd_fit(config_path, fit_seed->count() > 0, seed, output_dir,
                     parallel);
    if (sim_cmd->parsed())
      return cmd_simulate(config_path, sim_seed->count() > 0, seed, output_dir,
                          sim_par->count() > 0, parallel, resume, max_units);
    if (sum_cmd->parsed()) return cmd_summarize(draws_path, output_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
