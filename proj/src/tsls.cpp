#include "ivbart/tsls.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/QR>

namespace ivbart {

namespace {

constexpr double kRankTol = 1e-10;

Mat with_intercept(const Mat& x, int n) {
  Mat w(n, x.cols() + 1);
  w.col(0).setOnes();
  if (x.cols() > 0) w.rightCols(x.cols()) = x;
  return w;
}

// least squares with an explicit full-rank check that names the offender
Vec solve_full_rank(const Mat& a, const Vec& b, const std::string& what) {
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  qr.setThreshold(kRankTol);
  if (qr.rank() < a.cols()) {
    // the pivot ordering exposes which columns failed to add rank
    const auto& perm = qr.colsPermutation().indices();
    std::string cols;
    for (int i = qr.rank(); i < a.cols(); ++i)
      cols += (cols.empty() ? "" : ", ") + std::to_string(perm(i));
    throw std::runtime_error("rank-deficient design in " + what +
                             "; collinear columns: " + cols);
  }
  return qr.solve(b);
}

}  // namespace

double first_stage_F(const Vec& t, const Mat& z, const Mat& x, bool* infinite) {
  const int n = static_cast<int>(t.size());
  check(z.rows() == n && (x.cols() == 0 || x.rows() == n),
        "first_stage_F: row mismatch");
  check(z.cols() >= 1, "first_stage_F needs at least one instrument");
  const Mat w = with_intercept(x, n);
  Mat full(n, w.cols() + z.cols());
  full.leftCols(w.cols()) = w;
  full.rightCols(z.cols()) = z;
  check(n > full.cols(), "first_stage_F: too few rows");

  const Vec coef_full = solve_full_rank(full, t, "stage 1");
  const double rss_full = (t - full * coef_full).squaredNorm();
  const Vec coef_restr = solve_full_rank(w, t, "stage 1 (restricted)");
  const double rss_restr = (t - w * coef_restr).squaredNorm();

  const int q = static_cast<int>(z.cols());
  const int df = n - static_cast<int>(full.cols());
  if (infinite) *infinite = false;
  if (rss_full <= kRankTol * std::max(1.0, rss_restr)) {
    if (infinite) *infinite = true;
    return std::numeric_limits<double>::infinity();
  }
  return ((rss_restr - rss_full) / static_cast<double>(q)) /
         (rss_full / static_cast<double>(df));
}

TSLSFit fit_2sls(const Vec& y, const Vec& t, const Mat& z, const Mat& x) {
  const int n = static_cast<int>(y.size());
  check(t.size() == n && z.rows() == n && (x.cols() == 0 || x.rows() == n),
        "fit_2sls: row mismatch");
  check(n > z.cols() + x.cols() + 1, "fit_2sls: too few rows");

  TSLSFit fit;
  fit.first_stage_F = first_stage_F(t, z, x, &fit.f_infinite);

  const Mat w = with_intercept(x, n);
  Mat full(n, w.cols() + z.cols());
  full.leftCols(w.cols()) = w;
  full.rightCols(z.cols()) = z;
  const Vec pi = solve_full_rank(full, t, "stage 1");
  const Vec t_hat = full * pi;

  Mat design(n, 1 + w.cols());
  design.col(0) = t_hat;
  design.rightCols(w.cols()) = w;
  const Vec coef = solve_full_rank(design, y, "stage 2");
  fit.beta_hat = coef(0);
  fit.coef_x = coef.tail(w.cols());

  // classical SEs: residuals at the observed exposure, not the projection
  Mat observed(n, 1 + w.cols());
  observed.col(0) = t;
  observed.rightCols(w.cols()) = w;
  const Vec resid = y - observed * coef;
  const double s2 =
      resid.squaredNorm() / static_cast<double>(n - design.cols());
  const Mat xtx_inv =
      (design.transpose() * design).ldlt().solve(Mat::Identity(
          design.cols(), design.cols()));
  fit.se_beta = std::sqrt(s2 * xtx_inv(0, 0));
  return fit;
}

}  // namespace ivbart
