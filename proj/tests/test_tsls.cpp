#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ivbart/rng.hpp"
#include "ivbart/tsls.hpp"

using namespace ivbart;

namespace {

// independent reference implementation via explicit normal equations
struct Ref2SLS {
  double beta;
  double se_beta;
  double F;
};

Ref2SLS reference_2sls(const Vec& y, const Vec& t, const Mat& z, const Mat& x) {
  const int n = static_cast<int>(y.size());
  Mat w1(n, 1 + z.cols() + x.cols());  // [1, z, x]
  w1.col(0).setOnes();
  w1.middleCols(1, z.cols()) = z;
  w1.rightCols(x.cols()) = x;
  const Vec g1 = (w1.transpose() * w1).ldlt().solve(w1.transpose() * t);
  const Vec that = w1 * g1;

  Mat w2(n, 1 + 1 + x.cols());  // [that, 1, x]
  w2.col(0) = that;
  w2.col(1).setOnes();
  w2.rightCols(x.cols()) = x;
  const Mat wtw = w2.transpose() * w2;
  const Vec g2 = wtw.ldlt().solve(w2.transpose() * y);

  Mat w2obs = w2;
  w2obs.col(0) = t;  // residuals at the observed exposure
  const Vec resid = y - w2obs * g2;
  const double s2 = resid.squaredNorm() / (n - w2.cols());
  const Mat cov = s2 * wtw.inverse();

  // partial F for z in t ~ [1, x, z]
  Mat wr(n, 1 + x.cols());
  wr.col(0).setOnes();
  wr.rightCols(x.cols()) = x;
  const Vec gr = (wr.transpose() * wr).ldlt().solve(wr.transpose() * t);
  const double rss_r = (t - wr * gr).squaredNorm();
  const double rss_f = (t - that).squaredNorm();
  const double q = static_cast<double>(z.cols());
  const double dfe = static_cast<double>(n - w1.cols());
  return {g2(0), std::sqrt(cov(0, 0)), ((rss_r - rss_f) / q) / (rss_f / dfe)};
}

}  // namespace

TEST_CASE("noiseless structural model is recovered exactly") {
  const int n = 60;
  Rng rng(1);
  Mat z(n, 2), x(n, 1);
  Vec t(n), y(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = static_cast<double>(rng.index(3));
    z(i, 1) = rng.uniform(-1, 1);
    x(i, 0) = rng.uniform(-1, 1);
    t(i) = 1.0 + z(i, 0) - 0.5 * z(i, 1) + 0.3 * x(i, 0);
    y(i) = 2.0 * t(i) + 0.7 * x(i, 0) + 1.0;
  }
  const TSLSFit fit = fit_2sls(y, t, z, x);
  CHECK(fit.beta_hat == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(fit.coef_x(0) == doctest::Approx(1.0).epsilon(1e-9));   // intercept
  CHECK(fit.coef_x(1) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(fit.f_infinite);  // stage-1 residuals are exactly zero
  CHECK(std::isinf(fit.first_stage_F));
}

TEST_CASE("matches the normal-equation reference on noisy data") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 40;
    Mat z(n, 2), x(n, 2);
    Vec t(n), y(n);
    for (int i = 0; i < n; ++i) {
      z(i, 0) = static_cast<double>(rng.index(3));
      z(i, 1) = static_cast<double>(rng.index(3));
      x(i, 0) = rng.uniform(-1, 1);
      x(i, 1) = rng.uniform(-1, 1);
      const double e = rng.normal();
      t(i) = 0.6 * z(i, 0) - 0.4 * z(i, 1) + 0.2 * x(i, 0) + e;
      y(i) = 1.5 * t(i) - x(i, 1) + 0.7 * e + 0.5 * rng.normal();
    }
    const TSLSFit fit = fit_2sls(y, t, z, x);
    const Ref2SLS ref = reference_2sls(y, t, z, x);
    CHECK(fit.beta_hat == doctest::Approx(ref.beta).epsilon(1e-10));
    CHECK(fit.se_beta == doctest::Approx(ref.se_beta).epsilon(1e-10));
    CHECK(fit.first_stage_F == doctest::Approx(ref.F).epsilon(1e-10));
    CHECK(!fit.f_infinite);
  }
}

TEST_CASE("exact identification reduces to the Wald ratio") {
  // one instrument, no covariates: beta = cov(z, y) / cov(z, t)
  Rng rng(3);
  const int n = 50;
  Mat z(n, 1);
  const Mat x(n, 0);
  Vec t(n), y(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = static_cast<double>(rng.index(3));
    t(i) = 0.9 * z(i, 0) + rng.normal();
    y(i) = 2.5 * t(i) + rng.normal();
  }
  const double zm = z.col(0).mean(), tm = t.mean(), ym = y.mean();
  const double wald = ((z.col(0).array() - zm) * (y.array() - ym)).sum() /
                      ((z.col(0).array() - zm) * (t.array() - tm)).sum();
  const TSLSFit fit = fit_2sls(y, t, z, x);
  CHECK(fit.beta_hat == doctest::Approx(wald).epsilon(1e-10));
}

TEST_CASE("collinear design is rejected with the offending column named") {
  const int n = 30;
  Rng rng(8);
  Mat z(n, 1), x(n, 2);
  Vec t(n), y(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.uniform(-1, 1);
    x(i, 0) = rng.uniform(-1, 1);
    x(i, 1) = 2.0 * x(i, 0);  // exact duplicate direction
    t(i) = z(i, 0) + rng.normal();
    y(i) = t(i) + rng.normal();
  }
  CHECK_THROWS_WITH_AS(fit_2sls(y, t, z, x),
                       doctest::Contains("collinear"), std::runtime_error);
}

TEST_CASE("weak instruments give a small first-stage F") {
  Rng rng(99);
  const int n = 500;
  Mat z(n, 3), x(n, 1);
  Vec t(n), y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) z(i, j) = static_cast<double>(rng.index(3));
    x(i, 0) = rng.uniform(-1, 1);
    t(i) = rng.normal();  // instruments carry no signal
    y(i) = t(i) + rng.normal();
  }
  bool inf = false;
  const double f = first_stage_F(t, z, x, &inf);
  CHECK(!inf);
  CHECK(f < 5.0);
}
