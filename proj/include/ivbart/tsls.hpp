#pragma once

#include "ivbart/common.hpp"

namespace ivbart {

struct TSLSFit {
  double beta_hat = 0.0;      // exposure-effect estimate
  Vec coef_x;                 // intercept + covariate coefficients
  double se_beta = 0.0;       // classical (homoscedastic) standard error
  double first_stage_F = 0.0; // partial F for the instruments in stage 1
  bool f_infinite = false;    // stage-1 fit is exact; F reported as +inf
};

// Two-stage least squares of y on exposure t with instruments z and exogenous
// covariates x; an intercept is always included. Stage 2 standard errors use
// residuals recomputed at the observed exposure.
TSLSFit fit_2sls(const Vec& y, const Vec& t, const Mat& z, const Mat& x);

// Partial F-statistic for z in the regression of t on [1, x, z].
double first_stage_F(const Vec& t, const Mat& z, const Mat& x,
                     bool* infinite = nullptr);

}  // namespace ivbart
