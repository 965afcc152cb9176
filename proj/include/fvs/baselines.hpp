#pragma once

#include "fvs/linalg.hpp"
#include "fvs/probability.hpp"
#include "fvs/shrinkage.hpp"

#include <optional>
#include <vector>

namespace fvs::baselines {

using linalg::DesignMatrix;
using linalg::Matrix;
using linalg::Vector;

// Intercept-unpenalized ridge solutions along a lambda path, all produced
// from one SVD of the centered predictor block.
struct RidgePathFit {
  std::vector<double> lambdas;   // ascending
  Matrix coefficients;           // p x L
  Matrix fitted;                 // n x L
  bool standardized = false;
  std::optional<Matrix> transform;  // standardization matrix T when used
};

// Least squares through the pseudoinverse; identical to fit_fvs at gamma = 1.
shrinkage::ShrinkageFit ols_fit(const DesignMatrix& x, const Vector& y);

// The p x p matrix T such that XT has non-intercept columns with mean 0 and
// sample standard deviation 1 (divisor n-1).
Matrix standardization_transform(const DesignMatrix& x);

// argmin ||y - Xb||^2 + lambda ||b_{-1}||^2 for each lambda; when standardize
// is set the fit runs on XT and coefficients are mapped back to the original
// basis.
RidgePathFit ridge_path(const DesignMatrix& x, const Vector& y,
                        const std::vector<double>& lambdas, bool standardize);

// Same objective on an arbitrary design (first coefficient unpenalized even
// if the first column is not the intercept); used by the invariance
// demonstrations on transformed designs.
Vector ridge_coefficients_plain(const DesignMatrix& x, const Vector& y,
                                double lambda);

// {10^(-7 + 0.25 j) : j = 0..44}.
std::vector<double> default_lambda_grid();

struct RidgeCvFit {
  double lambda = 0.0;
  Vector coefficients;
  Vector fitted;
};

// K-fold cross validation over the lambda grid minimizing total held-out
// squared error, then a final fit on the full data.
RidgeCvFit ridge_cv(const DesignMatrix& x, const Vector& y,
                    const std::vector<double>& lambdas, int folds,
                    probability::RngStream rng, bool standardize);

}  // namespace fvs::baselines
