#include "ivbart/ivmodels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>

#include <Eigen/QR>

#include "ivbart/kernels.hpp"
#include "ivbart/stats.hpp"

namespace ivbart {

namespace {

// sub-stream tags so each sampler block owns an independent RNG stream
constexpr std::uint64_t kBlockInit = 1;
constexpr std::uint64_t kBlockF1 = 2;
constexpr std::uint64_t kBlockF2 = 3;
constexpr std::uint64_t kBlockErr = 4;

double resid_variance(const Vec& y, const Mat& design) {
  check(design.rows() > design.cols(), "too few rows for the OLS pre-pass");
  const Vec coef = design.colPivHouseholderQr().solve(y);
  const Vec e = y - design * coef;
  return e.squaredNorm() /
         static_cast<double>(design.rows() - design.cols());
}

Mat design_with(const Vec& first, const Mat& rest) {
  Mat d(first.size(), 1 + rest.cols());
  d.col(0) = first;
  if (rest.cols() > 0) d.rightCols(rest.cols()) = rest;
  return d;
}

struct ChainResult {
  std::vector<DrawRecord> records;
  Vec rho_sum;  // per observation, accumulated over retained draws
};

class ChainRunner {
 public:
  ChainRunner(const IVData& data, const ModelSpec& spec,
              const McmcConfig& mcmc, const std::vector<EvalPoint>& grid,
              const IWPrior& iw_prior, double sigma2_hat_y, int chain)
      : spec_(spec),
        mcmc_(mcmc),
        grid_(grid),
        iw_prior_(iw_prior),
        chain_(chain),
        n_(static_cast<int>(data.y.size())),
        rng_init_(derive_seed(mcmc.seed, {kBlockInit, std::uint64_t(chain)})),
        rng_f1_(derive_seed(mcmc.seed, {kBlockF1, std::uint64_t(chain)})),
        rng_f2_(derive_seed(mcmc.seed, {kBlockF2, std::uint64_t(chain)})),
        rng_err_(derive_seed(mcmc.seed, {kBlockErr, std::uint64_t(chain)})) {
    t_mean_ = data.t.mean();
    y_mean_ = data.y.mean();
    tc_ = data.t.array() - t_mean_;
    yc_ = data.y.array() - y_mean_;
    x_ = data.x;
    z_ = data.z;
    design_tx_ = design_with(data.t, data.x);

    const double t_range = data.t.maxCoeff() - data.t.minCoeff();
    const double y_range = data.y.maxCoeff() - data.y.minCoeff();
    check(t_range > 0.0 && y_range > 0.0, "degenerate exposure or outcome");

    const Variant v = spec.variant;
    EnsembleConfig base;
    base.numcut = spec.numcut;
    base.tree_prior = spec.tree_prior;
    base.likelihood_weight = spec.likelihood_weight;

    if (v != Variant::PlainBart) {
      EnsembleConfig c1 = base;
      c1.n_trees = spec.h_t;
      c1.leaf_prior.sigma_a =
          leaf_prior_scale(t_range, spec.k_stage1, spec.h_t);
      f1_ = std::make_unique<Ensemble>(c1, z_);
    }
    EnsembleConfig c2 = base;
    c2.n_trees = spec.h_y;
    c2.leaf_prior.sigma_a = leaf_prior_scale(y_range, spec.k_stage2, spec.h_y);
    switch (v) {
      case Variant::NpivBartH:
      case Variant::PlainBart:
        f2_ = std::make_unique<Ensemble>(c2, design_tx_);
        break;
      case Variant::NpivBartG: {
        Mat t_only(n_, 1);
        t_only.col(0) = data.t;
        f21_ = std::make_unique<Ensemble>(c2, std::move(t_only));
        f22_ = std::make_unique<Ensemble>(c2, x_);
        break;
      }
      case Variant::IvBartG:
        f22_ = std::make_unique<Ensemble>(c2, x_);
        sigma_beta_ = (y_range / t_range) / (2.0 * spec.k_stage2);
        break;
      case Variant::IvBartH: {
        c2.kind = LeafKind::Linear;
        c2.leaf_prior.sigma_b =
            leaf_prior_scale(y_range / t_range, spec.k_stage2, spec.h_y);
        // the slope multiplies the centered exposure
        f2lin_ = std::make_unique<Ensemble>(c2, x_, tc_);
        break;
      }
    }

    // error-state initialization at the prior mean: the diagonal of OLS
    // residual variances (matches plain-BART's sigma_yy start exactly)
    sigma_ = iw_prior_.scale / (iw_prior_.dof - 3.0);
    sigma_yy_ = sigma2_hat_y;
    lambda0_ = sigma2_hat_y *
               chisq_quantile(1.0 - spec.sigma_q, spec.sigma_nu) /
               spec.sigma_nu;
    if (spec.error_model == ErrorModel::Dpm) {
      dpm_hyper_.alpha_shape = spec.alpha_shape;
      dpm_hyper_.alpha_rate = spec.alpha_rate;
      dpm_hyper_.update_alpha = spec.update_alpha;
      dpm_hyper_.base = iw_prior_;
      Mat init_errors(n_, 2);
      init_errors.col(0) = tc_;
      init_errors.col(1) = yc_;
      dpm_ = init_dpm(init_errors, dpm_hyper_, rng_init_);
      dpm_.alpha = spec.alpha_init;
    }

    // one partial-dependence point per grid entry and ensemble part
    for (const EvalPoint& g : grid_) {
      PdPoint main, aux;
      switch (v) {
        case Variant::NpivBartH:
        case Variant::PlainBart:
          main.overrides = {{0, g.t}, {1, g.x1}};
          break;
        case Variant::NpivBartG:
          main.overrides = {{0, g.t}};   // f21 over t
          aux.overrides = {{0, g.x1}};   // f22 over x
          break;
        case Variant::IvBartG:
          aux.overrides = {{0, g.x1}};
          break;
        case Variant::IvBartH:
          aux.overrides = {{0, g.x1}};
          aux.has_exposure = true;
          aux.exposure = g.t - t_mean_;
          break;
      }
      pd_main_.push_back(main);
      pd_aux_.push_back(aux);
    }
  }

  ChainResult run() {
    ChainResult out;
    out.rho_sum = Vec::Zero(n_);
    const int total = mcmc_.burn_in + mcmc_.draws * mcmc_.thin;
    int retained = 0;
    for (int it = 0; it < total; ++it) {
      iterate();
      if (it >= mcmc_.burn_in && (it - mcmc_.burn_in) % mcmc_.thin == 0) {
        out.records.push_back(make_record(retained));
        accumulate_rho(out.rho_sum);
        ++retained;
      }
    }
    if (retained > 0) out.rho_sum /= static_cast<double>(retained);
    return out;
  }

 private:
  const Mat2& row_sigma(int i) const {
    return spec_.error_model == ErrorModel::Dpm
               ? dpm_.cluster_sigmas[dpm_.assignments[i]]
               : sigma_;
  }

  Vec f2_total_fit() const {
    switch (spec_.variant) {
      case Variant::NpivBartH:
      case Variant::PlainBart:
        return f2_->fit();
      case Variant::NpivBartG:
        return f21_->fit() + f22_->fit();
      case Variant::IvBartG:
        return beta_ * tc_ + f22_->fit();
      case Variant::IvBartH:
        return f2lin_->fit();
    }
    return Vec::Zero(n_);
  }

  void iterate() {
    const double w_lik = spec_.likelihood_weight;

    if (spec_.variant == Variant::PlainBart) {
      const Vec w = Vec::Constant(n_, sigma_yy_);
      f2_->backfit_sweep(yc_, w, rng_f2_);
      if (!spec_.fixed_sigma) {
        const Vec e = yc_ - f2_->fit();
        const double scale =
            spec_.sigma_nu * lambda0_ + w_lik * e.squaredNorm();
        sigma_yy_ =
            scale / rng_err_.chisq(spec_.sigma_nu + w_lik * n_);
      }
      return;
    }

    // stage 1: f1 against the conditional pseudo-outcome
    {
      const Vec f2fit = f2_total_fit();
      Vec tstar(n_), v(n_);
      for (int i = 0; i < n_; ++i) {
        const auto [ts, vi] = stage1_pseudo_outcome(
            tc_(i), yc_(i), f1_->fit()(i), f2fit(i), row_sigma(i));
        tstar(i) = ts;
        v(i) = vi;
      }
      f1_->backfit_sweep(tstar, v, rng_f1_);
    }

    // stage 2: the f2 form, against its conditional pseudo-outcome
    Vec ystar(n_), w(n_);
    for (int i = 0; i < n_; ++i) {
      const auto [ys, wi] =
          stage2_pseudo_outcome(tc_(i), yc_(i), f1_->fit()(i), row_sigma(i));
      ystar(i) = ys;
      w(i) = wi;
    }
    switch (spec_.variant) {
      case Variant::NpivBartH:
        f2_->backfit_sweep(ystar, w, rng_f2_);
        break;
      case Variant::NpivBartG:
        f21_->backfit_sweep(ystar - f22_->fit(), w, rng_f2_);
        f22_->backfit_sweep(ystar - f21_->fit(), w, rng_f2_);
        break;
      case Variant::IvBartG:
        f22_->backfit_sweep(ystar - beta_ * tc_, w, rng_f2_);
        beta_ = update_beta(ystar - f22_->fit(), tc_, w, sigma_beta_, rng_f2_,
                            w_lik);
        break;
      case Variant::IvBartH:
        f2lin_->backfit_sweep(ystar, w, rng_f2_);
        break;
      case Variant::PlainBart:
        break;  // unreachable
    }

    // error update on the current residual pairs
    if (spec_.fixed_sigma) return;
    Mat errors(n_, 2);
    errors.col(0) = tc_ - f1_->fit();
    errors.col(1) = yc_ - f2_total_fit();
    if (spec_.error_model == ErrorModel::BivariateNormal) {
      sigma_ = update_sigma_iw(errors, iw_prior_, rng_err_, w_lik);
    } else {
      assignment_sweep(errors, dpm_, iw_prior_, rng_err_);
      cluster_param_sweep(errors, dpm_, iw_prior_, rng_err_);
      dpm_.alpha = alpha_update(dpm_.n_clusters(), n_, dpm_.alpha, dpm_hyper_,
                                rng_err_);
    }
  }

  DrawRecord make_record(int retained_index) const {
    DrawRecord rec;
    rec.chain = chain_;
    rec.iteration = retained_index;
    rec.grid_f2 = evaluate_grid();

    if (spec_.variant == Variant::IvBartG) rec.beta = beta_;

    if (spec_.variant == Variant::PlainBart) {
      rec.rho_bar = 0.0;
      rec.n_clusters = 1;
      rec.sigma_t = 0.0;
      rec.sigma_y = std::sqrt(sigma_yy_);
      const Vec e = yc_ - f2_->fit();
      double ld = 0.0;
      for (int i = 0; i < n_; ++i) ld += norm_logpdf(e(i), 0.0, sigma_yy_);
      rec.log_density = ld;
      return rec;
    }

    Mat errors(n_, 2);
    errors.col(0) = tc_ - f1_->fit();
    errors.col(1) = yc_ - f2_total_fit();
    double rho_acc = 0.0, st_acc = 0.0, sy_acc = 0.0, ld = 0.0;
    for (int i = 0; i < n_; ++i) {
      const Mat2& s = row_sigma(i);
      rho_acc += s(0, 1) / std::sqrt(s(0, 0) * s(1, 1));
      st_acc += std::sqrt(s(0, 0));
      sy_acc += std::sqrt(s(1, 1));
      ld += log_mvn2(errors.row(i).transpose(), s);
    }
    rec.rho_bar = rho_acc / n_;
    rec.sigma_t = st_acc / n_;
    rec.sigma_y = sy_acc / n_;
    rec.log_density = ld;
    rec.n_clusters =
        spec_.error_model == ErrorModel::Dpm ? dpm_.n_clusters() : 1;
    return rec;
  }

  Vec evaluate_grid() const {
    const int m = static_cast<int>(grid_.size());
    Vec out = Vec::Constant(m, y_mean_);
    if (m == 0) return out;
    Mat cells;
    switch (spec_.variant) {
      case Variant::NpivBartH:
      case Variant::PlainBart:
        pd_cells_omp(f2_->trees(), f2_->grid(), design_tx_, pd_main_, cells);
        out += pd_profile(cells);
        break;
      case Variant::NpivBartG:
        pd_cells_omp(f21_->trees(), f21_->grid(), f21_->x(), pd_main_, cells);
        out += pd_profile(cells);
        pd_cells_omp(f22_->trees(), f22_->grid(), f22_->x(), pd_aux_, cells);
        out += pd_profile(cells);
        break;
      case Variant::IvBartG:
        pd_cells_omp(f22_->trees(), f22_->grid(), f22_->x(), pd_aux_, cells);
        out += pd_profile(cells);
        for (int g = 0; g < m; ++g) out(g) += beta_ * (grid_[g].t - t_mean_);
        break;
      case Variant::IvBartH:
        pd_cells_omp(f2lin_->trees(), f2lin_->grid(), f2lin_->x(), pd_aux_,
                     cells);
        out += pd_profile(cells);
        break;
    }
    return out;
  }

  void accumulate_rho(Vec& rho_sum) const {
    if (spec_.variant == Variant::PlainBart) return;
    if (spec_.error_model == ErrorModel::Dpm) {
      rho_sum += rho_per_obs(dpm_);
    } else {
      const double rho = sigma_(0, 1) / std::sqrt(sigma_(0, 0) * sigma_(1, 1));
      rho_sum.array() += rho;
    }
  }

  ModelSpec spec_;
  McmcConfig mcmc_;
  std::vector<EvalPoint> grid_;
  IWPrior iw_prior_;
  int chain_;
  int n_;
  Rng rng_init_, rng_f1_, rng_f2_, rng_err_;

  double t_mean_ = 0.0, y_mean_ = 0.0;
  Vec tc_, yc_;
  Mat x_, z_, design_tx_;

  std::unique_ptr<Ensemble> f1_, f2_, f21_, f22_, f2lin_;
  double beta_ = 0.0;
  double sigma_beta_ = 1.0;
  Mat2 sigma_;
  double sigma_yy_ = 1.0;
  double lambda0_ = 1.0;
  DPMState dpm_;
  DPMHyper dpm_hyper_;

  std::vector<PdPoint> pd_main_, pd_aux_;
};

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::NpivBartH: return "npivBART-h";
    case Variant::NpivBartG: return "npivBART-g";
    case Variant::IvBartH: return "ivBART-h";
    case Variant::IvBartG: return "ivBART-g";
    case Variant::PlainBart: return "BART";
  }
  return "?";
}

Variant variant_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s += static_cast<char>(std::tolower(c));
  if (s == "npivbart-h") return Variant::NpivBartH;
  if (s == "npivbart-g") return Variant::NpivBartG;
  if (s == "ivbart-h") return Variant::IvBartH;
  if (s == "ivbart-g") return Variant::IvBartG;
  if (s == "bart" || s == "plain-bart") return Variant::PlainBart;
  throw std::runtime_error("unknown model variant: " + name);
}

std::pair<double, double> stage1_pseudo_outcome(double t, double y,
                                                double /*f1*/, double f2,
                                                const Mat2& sigma) {
  check(sigma(1, 1) > 0.0, "sigma_yy must be positive");
  const double ratio = sigma(0, 1) / sigma(1, 1);
  return {t - ratio * (y - f2), sigma(0, 0) - sigma(0, 1) * ratio};
}

std::pair<double, double> stage2_pseudo_outcome(double t, double y, double f1,
                                                const Mat2& sigma) {
  check(sigma(0, 0) > 0.0, "sigma_tt must be positive");
  const double ratio = sigma(0, 1) / sigma(0, 0);
  return {y - ratio * (t - f1), sigma(1, 1) - sigma(0, 1) * ratio};
}

Mat2 update_sigma_iw(const Mat& errors, const IWPrior& prior, Rng& rng,
                     double weight) {
  check(errors.cols() == 2, "errors must be n x 2");
  Mat2 scatter = Mat2::Zero();
  for (int i = 0; i < errors.rows(); ++i) {
    const Vec2 e = errors.row(i).transpose();
    scatter += e * e.transpose();
  }
  return draw_inv_wishart2(prior.dof + weight * errors.rows(),
                           prior.scale + weight * scatter, rng);
}

double update_beta(const Vec& resid, const Vec& t, const Vec& w,
                   double sigma_beta, Rng& rng, double weight) {
  check(resid.size() == t.size() && t.size() == w.size(),
        "update_beta length mismatch");
  check(sigma_beta > 0.0, "sigma_beta must be positive");
  double prec = 1.0 / (sigma_beta * sigma_beta);
  double num = 0.0;
  for (int i = 0; i < t.size(); ++i) {
    prec += weight * t(i) * t(i) / w(i);
    num += weight * t(i) * resid(i) / w(i);
  }
  return num / prec + rng.normal() / std::sqrt(prec);
}

PosteriorDraws fit(const IVData& data, const ModelSpec& spec,
                   const McmcConfig& mcmc, const std::vector<EvalPoint>& grid,
                   int n_threads) {
  const int n = static_cast<int>(data.y.size());
  check(n > 0 && data.t.size() == n, "fit: y/t length mismatch");
  check(data.z.rows() == n || spec.variant == Variant::PlainBart,
        "fit: instrument rows mismatch");
  check(data.x.rows() == n && data.x.cols() >= 1,
        "fit: need at least one covariate (x1)");
  check(data.y.allFinite() && data.t.allFinite() && data.x.allFinite() &&
            (data.z.size() == 0 || data.z.allFinite()),
        "fit: non-finite values in the data");
  check(mcmc.chains >= 1 && mcmc.draws >= 0 && mcmc.burn_in >= 0 &&
            mcmc.thin >= 1,
        "fit: bad MCMC sizes");
  check(!(spec.error_model == ErrorModel::Dpm && spec.likelihood_weight != 1.0),
        "likelihood tempering is only supported with bivariate-normal errors");
  check(!(spec.error_model == ErrorModel::Dpm && spec.fixed_sigma),
        "fixed_sigma requires bivariate-normal errors");

  // IW prior scaled to the OLS residual variances so its mean matches them
  IWPrior iw;
  iw.dof = 6.0;
  double vt;
  if (spec.variant == Variant::PlainBart || data.z.cols() == 0) {
    vt = (data.t.array() - data.t.mean()).matrix().squaredNorm() /
         std::max(1, n - 1);
  } else {
    Mat d1(n, 1 + data.z.cols() + data.x.cols());
    d1.col(0).setOnes();
    d1.middleCols(1, data.z.cols()) = data.z;
    d1.rightCols(data.x.cols()) = data.x;
    vt = resid_variance(data.t, d1);
  }
  Mat d2(n, 2 + data.x.cols());
  d2.col(0).setOnes();
  d2.col(1) = data.t;
  d2.rightCols(data.x.cols()) = data.x;
  const double vy = resid_variance(data.y, d2);
  iw.scale = Mat2::Zero();
  iw.scale(0, 0) = (iw.dof - 3.0) * vt;
  iw.scale(1, 1) = (iw.dof - 3.0) * vy;

  PosteriorDraws out;
  out.seed = mcmc.seed;
  out.chains = mcmc.chains;
  out.grid = grid;
  out.y_mean = data.y.mean();
  out.t_mean = data.t.mean();
  const double t_lo = data.t.minCoeff(), t_hi = data.t.maxCoeff();
  for (const EvalPoint& g : grid)
    out.extrapolated.push_back(g.t < t_lo || g.t > t_hi);

  const int workers = std::max(1, n_threads);
  std::vector<ChainResult> results(mcmc.chains);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers) \
    if (workers > 1)
  for (int c = 0; c < mcmc.chains; ++c) {
    ChainRunner runner(data, spec, mcmc, grid, iw, vy, c);
    results[c] = runner.run();
  }

  out.rho_i_mean = Mat::Zero(mcmc.chains, n);
  for (int c = 0; c < mcmc.chains; ++c) {
    for (DrawRecord& rec : results[c].records)
      out.records.push_back(std::move(rec));
    out.rho_i_mean.row(c) = results[c].rho_sum.transpose();
  }
  return out;
}

PdSummary partial_dependence(const PosteriorDraws& draws) {
  PdSummary s;
  s.grid = draws.grid;
  s.extrapolated = draws.extrapolated;
  const int m = static_cast<int>(draws.grid.size());
  s.mean = Vec::Constant(m, std::numeric_limits<double>::quiet_NaN());
  s.lo = s.mean;
  s.hi = s.mean;
  if (draws.records.empty()) return s;
  std::vector<double> vals(draws.records.size());
  for (int g = 0; g < m; ++g) {
    for (size_t d = 0; d < draws.records.size(); ++d)
      vals[d] = draws.records[d].grid_f2(g);
    s.mean(g) = mean(vals);
    s.lo(g) = percentile(vals, 0.025);
    s.hi(g) = percentile(vals, 0.975);
  }
  return s;
}

RhoDiagnostics rho_diagnostics(const PosteriorDraws& draws) {
  RhoDiagnostics d;
  d.rho_bar_d = Vec(draws.records.size());
  for (size_t i = 0; i < draws.records.size(); ++i) {
    d.chain.push_back(draws.records[i].chain);
    d.rho_bar_d(i) = draws.records[i].rho_bar;
  }
  d.rho_bar_i = draws.rho_i_mean;
  return d;
}

}  // namespace ivbart
