#pragma once

#include <vector>

#include "ivbart/common.hpp"
#include "ivbart/rng.hpp"

namespace ivbart {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

double norm_cdf(double x);
double norm_quantile(double p);  // Wichura AS241 (PPND16)
inline double norm_logpdf(double x, double mean, double var) {
  double z = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + z * z / var);
}

// regularized incomplete gamma P(a,x) (lower) and Q(a,x) (upper)
double gamma_p(double a, double x);
double gamma_q(double a, double x);

inline double chisq_cdf(double x, double dof) { return gamma_p(0.5 * dof, 0.5 * x); }
inline double chisq_sf(double x, double dof) { return gamma_q(0.5 * dof, 0.5 * x); }
double chisq_quantile(double p, double dof);

// chi-square goodness-of-fit p-value for observed counts vs probabilities
double chisq_gof_pvalue(const std::vector<double>& observed,
                        const std::vector<double>& expected);

// two-sample Kolmogorov-Smirnov p-value (asymptotic)
double ks2_pvalue(std::vector<double> a, std::vector<double> b);

// type-7 (linear interpolation) quantile of a sample; q in [0,1]
double percentile(std::vector<double> x, double q);

double mean(const std::vector<double>& x);
double sample_sd(const std::vector<double>& x);  // n-1 denominator

// zero-mean bivariate normal / Student-t log densities
double log_mvn2(const Vec2& e, const Mat2& sigma);
double log_mvt2(const Vec2& e, const Mat2& scale, double dof);

bool is_spd2(const Mat2& m);

// Wishart_2(dof, scale) via Bartlett; dof > 1
Mat2 draw_wishart2(double dof, const Mat2& scale, Rng& rng);
// InverseWishart_2(dof, scale); dof > 3 for finite mean scale/(dof-3)
Mat2 draw_inv_wishart2(double dof, const Mat2& scale, Rng& rng);

}  // namespace ivbart
