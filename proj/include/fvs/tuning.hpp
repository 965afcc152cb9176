#pragma once

#include "fvs/linalg.hpp"
#include "fvs/probability.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fvs::tuning {

using linalg::DesignMatrix;
using linalg::Index;
using linalg::Vector;

enum class Method {
  oracle,
  f_ratio,
  f_ratio_q90,
  f_ratio_q95,
  cv,
  highdim_bar,
  highdim_bar_corrected,
  submodel_f_ratio,
  submodel_oracle,
};

std::string method_name(Method m);

struct TuningResult {
  double gamma = 0.0;
  Method method = Method::f_ratio;
  std::optional<double> f_stat;           // F-based methods only
  std::optional<double> sigma2_estimate;  // variance estimate used, if any
  std::optional<double> alpha;            // high-dimensional methods only
  bool clamped = false;                   // gamma was truncated into [0, 1]
};

// ||y - P_X y||^2 / (n - rank(X)); unbiased for sigma^2.  Throws when
// n <= rank(X) (high-dimensional regime, the quantity does not exist).
double sigma_hat2(const DesignMatrix& x, const Vector& y);

// F statistic comparing the intercept-only model to the full model:
// ||P_X y - P_1 y||^2 / (sigma_hat2 * (rank(X)-1)).  Returns +inf when the
// residual variance is exactly zero but the numerator is not.
double f_statistic(const DesignMatrix& x, const Vector& y);

// (1 - 1/f) * 1(f > 1); maps f = +inf to 1.
double gamma_hat(double f);

enum class ThresholdLevel { q90, q95 };

// (1 - 1/f) * 1(f >= f_q) with f_q the central-F quantile at (d1, d2).
double gamma_hat_thresholded(double f, ThresholdLevel level, int d1, int d2);

// delta2 / (sigma2 * (r-1) + delta2): the risk-minimizing shrinkage weight.
double gamma_opt(double delta2, double sigma2, Index r);

// Submodel analogue built on F~ = ||P_X y - P_X0 y||^2 / (sigma_hat2 * (r-r0)).
TuningResult gamma_tilde_submodel(const DesignMatrix& x,
                                  const std::vector<Index>& submodel_cols,
                                  const Vector& y,
                                  std::optional<ThresholdLevel> thresholded);

// K y with K = X (X'X + 2 n alpha M)^-1 X'.
Vector k_matrix_apply(const DesignMatrix& x, double alpha, const Vector& y);

// trace(K), from the SVD plus the rank-one downdate correction; never forms K.
double k_matrix_trace(const DesignMatrix& x, double alpha);

// High-dimensional error-variance estimator n^-1 y'(I-K)y; the corrected
// variant divides by C = 1 - trace(K)/rank(X).
double sigma_check2(const DesignMatrix& x, const Vector& y, double alpha,
                    bool corrected);

// alpha = n^t / (2 ||y - ybar 1||^2); t = 1, 1.5, 2, 3 are the rep1..rep4
// schedules of the simulation harness.
double alpha_schedule(double t, const Vector& y, Index n);

// High-dimensional plug-in selector; corrected = false gives
//   y'(I - P_1 - ((r-1)/r)(I-K)) y / y'(I - P_1) y
// and corrected = true the max(0, .)-truncated bias-corrected form with
// (r-1)/(r - trace(K)).
TuningResult gamma_bar(const DesignMatrix& x, const Vector& y, double alpha,
                       bool corrected);

// K-fold cross validation over a gamma grid; each fold's fit uses the
// min-norm coefficients of the training design, ties break toward smaller
// gamma, and the objective is the total held-out squared error.
TuningResult cv_gamma(const DesignMatrix& x, const Vector& y, int folds,
                      const std::vector<double>& grid,
                      probability::RngStream rng);

// {k/99 : k = 0..99}.
std::vector<double> default_gamma_grid();

}  // namespace fvs::tuning
