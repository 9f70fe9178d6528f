#include "ivbart/stats.hpp"

#include <algorithm>
#include <cmath>

namespace ivbart {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Wichura (1988) algorithm AS241, PPND16.
double norm_quantile(double p) {
  check(p > 0.0 && p < 1.0, "norm_quantile: p must be in (0,1)");
  double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double v;
  if (r <= 5.0) {
    r -= 1.6;
    v = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -v : v;
}

namespace {

// series expansion for P(a,x), x < a+1
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// continued fraction for Q(a,x), x >= a+1
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  check(a > 0.0 && x >= 0.0, "gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  check(a > 0.0 && x >= 0.0, "gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chisq_quantile(double p, double dof) {
  check(p > 0.0 && p < 1.0, "chisq_quantile: p must be in (0,1)");
  double lo = 0.0, hi = dof + 10.0;
  while (chisq_cdf(hi, dof) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (chisq_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double chisq_gof_pvalue(const std::vector<double>& observed,
                        const std::vector<double>& expected) {
  check(observed.size() == expected.size() && !observed.empty(),
        "chisq_gof_pvalue: size mismatch");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    check(expected[i] > 0.0, "chisq_gof_pvalue: zero expected count");
    double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  return chisq_sf(stat, static_cast<double>(observed.size() - 1));
}

double ks2_pvalue(std::vector<double> a, std::vector<double> b) {
  check(!a.empty() && !b.empty(), "ks2_pvalue: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double na = static_cast<double>(a.size());
  double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  double en = std::sqrt(na * nb / (na + nb));
  double lambda = (en + 0.12 + 0.11 / en) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double percentile(std::vector<double> x, double q) {
  check(!x.empty(), "percentile: empty sample");
  check(q >= 0.0 && q <= 1.0, "percentile: q must be in [0,1]");
  std::sort(x.begin(), x.end());
  double h = q * (static_cast<double>(x.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, x.size() - 1);
  double frac = h - static_cast<double>(lo);
  return x[lo] + frac * (x[hi] - x[lo]);
}

double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double log_mvn2(const Vec2& e, const Mat2& sigma) {
  double det = sigma(0, 0) * sigma(1, 1) - sigma(0, 1) * sigma(1, 0);
  check(det > 0.0 && sigma(0, 0) > 0.0, "log_mvn2: sigma not SPD");
  double q = (sigma(1, 1) * e(0) * e(0) - 2.0 * sigma(0, 1) * e(0) * e(1) +
              sigma(0, 0) * e(1) * e(1)) /
             det;
  return -kLogTwoPi - 0.5 * std::log(det) - 0.5 * q;
}

double log_mvt2(const Vec2& e, const Mat2& scale, double dof) {
  double det = scale(0, 0) * scale(1, 1) - scale(0, 1) * scale(1, 0);
  check(det > 0.0 && scale(0, 0) > 0.0 && dof > 0.0, "log_mvt2: bad arguments");
  double q = (scale(1, 1) * e(0) * e(0) - 2.0 * scale(0, 1) * e(0) * e(1) +
              scale(0, 0) * e(1) * e(1)) /
             det;
  return std::lgamma(0.5 * (dof + 2.0)) - std::lgamma(0.5 * dof) - std::log(dof) -
         std::log(M_PI) - 0.5 * std::log(det) -
         0.5 * (dof + 2.0) * std::log1p(q / dof);
}

bool is_spd2(const Mat2& m) {
  return m(0, 0) > 0.0 && m(1, 1) > 0.0 &&
         std::fabs(m(0, 1) - m(1, 0)) < 1e-12 &&
         m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) > 0.0;
}

Mat2 draw_wishart2(double dof, const Mat2& scale, Rng& rng) {
  check(dof > 1.0, "draw_wishart2: dof must exceed 1");
  check(is_spd2(scale), "draw_wishart2: scale not SPD");
  Eigen::LLT<Mat2> llt(scale);
  Mat2 l = llt.matrixL();
  Mat2 a = Mat2::Zero();
  a(0, 0) = std::sqrt(rng.chisq(dof));
  a(1, 1) = std::sqrt(rng.chisq(dof - 1.0));
  a(1, 0) = rng.normal();
  Mat2 la = l * a;
  return la * la.transpose();
}

Mat2 draw_inv_wishart2(double dof, const Mat2& scale, Rng& rng) {
  Mat2 w = draw_wishart2(dof, scale.inverse(), rng);
  return w.inverse();
}

}  // namespace ivbart
