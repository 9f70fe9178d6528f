#include "ivbart/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace ivbart {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// complains about any key of `j` not in `allowed`
void reject_unknown_keys(const nlohmann::json& j,
                         const std::set<std::string>& allowed,
                         const std::string& where) {
  check(j.is_object(), where + " must be a JSON object");
  std::string bad;
  for (const auto& kv : j.items())
    if (!allowed.count(kv.key())) bad += (bad.empty() ? "" : ", ") + kv.key();
  check(bad.empty(), "unknown keys in " + where + ": " + bad);
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void parse_model_into(const nlohmann::json& j, ModelSpec& spec) {
  reject_unknown_keys(
      j,
      {"variant", "error_model", "k_stage1", "k_stage2", "h_t", "h_y",
       "numcut", "likelihood_weight", "fixed_sigma", "alpha_shape",
       "alpha_rate", "update_alpha", "alpha_init", "sigma_nu", "sigma_q",
       "tree_base", "tree_power", "p_grow", "p_prune", "p_change"},
      "model");
  if (j.contains("variant"))
    spec.variant = variant_from_name(j.at("variant").get<std::string>());
  if (j.contains("error_model")) {
    const std::string em = j.at("error_model").get<std::string>();
    check(em == "bivariate-normal" || em == "dpm",
          "error_model must be bivariate-normal or dpm");
    spec.error_model =
        em == "dpm" ? ErrorModel::Dpm : ErrorModel::BivariateNormal;
  }
  spec.k_stage1 = get_or(j, "k_stage1", spec.k_stage1);
  spec.k_stage2 = get_or(j, "k_stage2", spec.k_stage2);
  spec.h_t = get_or(j, "h_t", spec.h_t);
  spec.h_y = get_or(j, "h_y", spec.h_y);
  spec.numcut = get_or(j, "numcut", spec.numcut);
  spec.likelihood_weight = get_or(j, "likelihood_weight", spec.likelihood_weight);
  spec.fixed_sigma = get_or(j, "fixed_sigma", spec.fixed_sigma);
  spec.alpha_shape = get_or(j, "alpha_shape", spec.alpha_shape);
  spec.alpha_rate = get_or(j, "alpha_rate", spec.alpha_rate);
  spec.update_alpha = get_or(j, "update_alpha", spec.update_alpha);
  spec.alpha_init = get_or(j, "alpha_init", spec.alpha_init);
  spec.sigma_nu = get_or(j, "sigma_nu", spec.sigma_nu);
  spec.sigma_q = get_or(j, "sigma_q", spec.sigma_q);
  spec.tree_prior.base = get_or(j, "tree_base", spec.tree_prior.base);
  spec.tree_prior.power = get_or(j, "tree_power", spec.tree_prior.power);
  spec.tree_prior.p_grow = get_or(j, "p_grow", spec.tree_prior.p_grow);
  spec.tree_prior.p_prune = get_or(j, "p_prune", spec.tree_prior.p_prune);
  spec.tree_prior.p_change = get_or(j, "p_change", spec.tree_prior.p_change);
}

void parse_mcmc_into(const nlohmann::json& j, McmcConfig& mcmc) {
  reject_unknown_keys(j, {"burn_in", "draws", "chains", "thin", "seed"},
                      "mcmc");
  mcmc.burn_in = get_or(j, "burn_in", mcmc.burn_in);
  mcmc.draws = get_or(j, "draws", mcmc.draws);
  mcmc.chains = get_or(j, "chains", mcmc.chains);
  mcmc.thin = get_or(j, "thin", mcmc.thin);
  mcmc.seed = get_or(j, "seed", mcmc.seed);
}

void parse_grid_into(const nlohmann::json& j, EvalGrid& grid) {
  reject_unknown_keys(j, {"t", "x1"}, "grid");
  if (j.contains("t")) grid.t_points = j.at("t").get<std::vector<double>>();
  if (j.contains("x1")) grid.x1_points = j.at("x1").get<std::vector<double>>();
  check(!grid.t_points.empty() && !grid.x1_points.empty(),
        "grid needs at least one t and one x1 point");
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double_strict(const std::string& s, const std::string& where) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, x);
  check(res.ec == std::errc() && res.ptr == last,
        "not a number at " + where + ": '" + s + "'");
  return x;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check(out.good(), "cannot write " + tmp.string());
    out << content;
    out.flush();
    check(out.good(), "short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

int Csv::col(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

int Csv::col_required(const std::string& name) const {
  const int i = col(name);
  check(i >= 0, "missing column '" + name + "'");
  return i;
}

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  Csv csv;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!have_header) {
      csv.columns = split_line(t);
      check(!csv.columns.empty(), path + ": empty header");
      have_header = true;
      continue;
    }
    const std::vector<std::string> cells = split_line(t);
    check(cells.size() == csv.columns.size(),
          path + ":" + std::to_string(lineno) + ": expected " +
              std::to_string(csv.columns.size()) + " cells, got " +
              std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (size_t c = 0; c < cells.size(); ++c)
      row[c] = parse_double_strict(
          cells[c], path + ":" + std::to_string(lineno) + " column '" +
                        csv.columns[c] + "'");
    csv.rows.push_back(std::move(row));
  }
  check(have_header, path + ": no header row");
  return csv;
}

void write_csv(const std::string& path,
               const std::vector<std::string>& comments,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const std::string& c : comments) out += "# " + c + "\n";
  for (size_t i = 0; i < columns.size(); ++i)
    out += (i ? "," : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    check(row.size() == columns.size(), "csv row width mismatch");
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  write_text_atomic(path, out);
}

void write_csv_numeric(const std::string& path,
                       const std::vector<std::string>& comments,
                       const std::vector<std::string>& columns,
                       const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<std::string> r;
    r.reserve(row.size());
    for (double x : row) r.push_back(format_double(x));
    cells.push_back(std::move(r));
  }
  write_csv(path, comments, columns, cells);
}

void write_draws(const std::string& path, const PosteriorDraws& draws,
                 std::uint64_t cfg_hash) {
  std::string out;
  nlohmann::json header;
  header["type"] = "header";
  header["schema"] = draws.schema;
  header["seed"] = draws.seed;
  header["chains"] = draws.chains;
  header["config_hash"] = cfg_hash;
  header["y_mean"] = draws.y_mean;
  header["t_mean"] = draws.t_mean;
  nlohmann::json grid = nlohmann::json::array();
  for (const EvalPoint& g : draws.grid) grid.push_back({g.t, g.x1});
  header["grid"] = std::move(grid);
  header["extrapolated"] = draws.extrapolated;
  out += header.dump() + "\n";

  for (const DrawRecord& rec : draws.records) {
    nlohmann::json r;
    r["type"] = "draw";
    r["chain"] = rec.chain;
    r["iter"] = rec.iteration;
    r["grid_f2"] = std::vector<double>(rec.grid_f2.data(),
                                       rec.grid_f2.data() + rec.grid_f2.size());
    if (std::isnan(rec.beta))
      r["beta"] = nullptr;
    else
      r["beta"] = rec.beta;
    r["rho_bar"] = rec.rho_bar;
    r["n_clusters"] = rec.n_clusters;
    r["sigma_t"] = rec.sigma_t;
    r["sigma_y"] = rec.sigma_y;
    r["log_density"] = rec.log_density;
    out += r.dump() + "\n";
  }

  nlohmann::json trailer;
  trailer["type"] = "rho_i_mean";
  nlohmann::json rows = nlohmann::json::array();
  for (int c = 0; c < draws.rho_i_mean.rows(); ++c) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < draws.rho_i_mean.cols(); ++i)
      row.push_back(draws.rho_i_mean(c, i));
    rows.push_back(std::move(row));
  }
  trailer["value"] = std::move(rows);
  out += trailer.dump() + "\n";
  write_text_atomic(path, out);
}

PosteriorDraws read_draws(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cannot open " + path);
  PosteriorDraws draws;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "header") {
      draws.schema = j.at("schema").get<std::string>();
      check(draws.schema == kSchemaVersion,
            "schema version mismatch: file has " + draws.schema +
                ", this build reads " + std::string(kSchemaVersion));
      draws.seed = j.at("seed").get<std::uint64_t>();
      draws.chains = j.at("chains").get<int>();
      draws.y_mean = j.at("y_mean").get<double>();
      draws.t_mean = j.at("t_mean").get<double>();
      for (const auto& g : j.at("grid"))
        draws.grid.push_back({g[0].get<double>(), g[1].get<double>()});
      draws.extrapolated = j.at("extrapolated").get<std::vector<bool>>();
      have_header = true;
    } else if (type == "draw") {
      check(have_header, path + ": draw record before header");
      DrawRecord rec;
      rec.chain = j.at("chain").get<int>();
      rec.iteration = j.at("iter").get<int>();
      const auto vals = j.at("grid_f2").get<std::vector<double>>();
      rec.grid_f2 = Eigen::Map<const Vec>(vals.data(), vals.size());
      rec.beta = j.at("beta").is_null()
                     ? std::numeric_limits<double>::quiet_NaN()
                     : j.at("beta").get<double>();
      rec.rho_bar = j.at("rho_bar").get<double>();
      rec.n_clusters = j.at("n_clusters").get<int>();
      rec.sigma_t = j.at("sigma_t").get<double>();
      rec.sigma_y = j.at("sigma_y").get<double>();
      rec.log_density = j.at("log_density").get<double>();
      draws.records.push_back(std::move(rec));
    } else if (type == "rho_i_mean") {
      const auto& rows = j.at("value");
      const int nr = static_cast<int>(rows.size());
      const int nc = nr > 0 ? static_cast<int>(rows[0].size()) : 0;
      draws.rho_i_mean = Mat::Zero(nr, nc);
      for (int c = 0; c < nr; ++c)
        for (int i = 0; i < nc; ++i)
          draws.rho_i_mean(c, i) = rows[c][i].get<double>();
    } else {
      throw std::runtime_error(path + ": unknown record type " + type);
    }
  }
  check(have_header, path + ": missing header record");
  return draws;
}

FitConfig parse_fit_config(const nlohmann::json& j) {
  reject_unknown_keys(
      j, {"data", "columns", "model", "mcmc", "grid", "output", "seed"},
      "fit config");
  FitConfig cfg;
  cfg.data_path = j.at("data").get<std::string>();
  const nlohmann::json& cols = j.at("columns");
  reject_unknown_keys(cols, {"outcome", "exposure", "instruments", "covariates"},
                      "columns");
  cfg.outcome = cols.at("outcome").get<std::string>();
  cfg.exposure = cols.at("exposure").get<std::string>();
  cfg.instruments = cols.at("instruments").get<std::vector<std::string>>();
  cfg.covariates = cols.at("covariates").get<std::vector<std::string>>();
  if (j.contains("model")) parse_model_into(j.at("model"), cfg.spec);
  if (j.contains("mcmc")) parse_mcmc_into(j.at("mcmc"), cfg.mcmc);
  if (j.contains("grid")) parse_grid_into(j.at("grid"), cfg.grid);
  cfg.output_dir = get_or<std::string>(j, "output", cfg.output_dir);
  cfg.mcmc.seed = get_or(j, "seed", cfg.mcmc.seed);

  std::set<std::string> roles{cfg.outcome, cfg.exposure};
  for (const std::string& s : cfg.instruments) roles.insert(s);
  for (const std::string& s : cfg.covariates) roles.insert(s);
  check(roles.size() ==
            2 + cfg.instruments.size() + cfg.covariates.size(),
        "column roles must be disjoint");
  check(!cfg.covariates.empty(), "need at least one covariate (x1)");
  return cfg;
}

StudyConfig parse_study_config(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"name", "scenarios", "methods", "mcmc", "grid",
                       "output", "seed", "parallel"},
                      "study config");
  StudyConfig cfg;
  cfg.name = get_or<std::string>(j, "name", cfg.name);
  for (const nlohmann::json& s : j.at("scenarios")) {
    reject_unknown_keys(
        s, {"truth", "rho", "c", "n", "n_snps", "n_x", "replications"},
        "scenario");
    SimScenario sc;
    sc.truth = truth_from_name(s.at("truth").get<std::string>());
    sc.rho = get_or(s, "rho", sc.rho);
    sc.c_signal = get_or(s, "c", sc.c_signal);
    sc.n = get_or(s, "n", sc.n);
    sc.n_snps = get_or(s, "n_snps", sc.n_snps);
    sc.n_x = get_or(s, "n_x", sc.n_x);
    sc.replications = get_or(s, "replications", sc.replications);
    cfg.scenarios.push_back(sc);
  }
  for (const nlohmann::json& m : j.at("methods")) {
    StudyMethod method;
    if (m.is_string()) {
      const std::string name = m.get<std::string>();
      if (name == "2SLS") {
        method.name = name;
        method.is_tsls = true;
      } else {
        method.spec.variant = variant_from_name(name);
        method.name = variant_name(method.spec.variant);
      }
    } else {
      check(m.is_object(), "method must be a name or an object");
      check(m.contains("variant"), "method object needs a variant");
      nlohmann::json model = m;
      std::string label;
      if (model.contains("name")) {
        label = model.at("name").get<std::string>();
        model.erase("name");
      }
      if (model.at("variant").get<std::string>() == "2SLS") {
        method.is_tsls = true;
        method.name = label.empty() ? "2SLS" : label;
      } else {
        parse_model_into(model, method.spec);
        method.name =
            label.empty() ? variant_name(method.spec.variant) : label;
      }
    }
    cfg.methods.push_back(std::move(method));
  }
  if (j.contains("mcmc")) parse_mcmc_into(j.at("mcmc"), cfg.mcmc);
  if (j.contains("grid")) parse_grid_into(j.at("grid"), cfg.grid);
  cfg.output_dir = get_or<std::string>(j, "output", cfg.output_dir);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.parallel = get_or(j, "parallel", cfg.parallel);
  check(!cfg.scenarios.empty() && !cfg.methods.empty(),
        "study needs at least one scenario and one method");
  return cfg;
}

std::uint64_t config_hash(const nlohmann::json& j) { return fnv1a64(j.dump()); }

}  // namespace ivbart
