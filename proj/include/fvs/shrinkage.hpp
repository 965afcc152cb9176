#pragma once

#include "fvs/linalg.hpp"

#include <optional>
#include <vector>

namespace fvs::shrinkage {

using linalg::DesignMatrix;
using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

enum class TargetKind { intercept, submodel };

// A fitted-value shrinkage fit: fitted = gamma * P_X y + (1-gamma) * P_0 y,
// where P_0 projects onto the target (the all-ones column, or a submodel).
// The coefficient vector is always the minimum 2-norm representative.
struct ShrinkageFit {
  double gamma = 1.0;
  Vector coefficients;
  Vector fitted;
  TargetKind target = TargetKind::intercept;
  std::vector<Index> target_columns;    // 0-based; empty for intercept target
  std::optional<double> sigma_hat2;     // present only when n > rank(X)
};

// Shrinks the least-squares fitted values toward the intercept-only fit.
ShrinkageFit fit_fvs(const DesignMatrix& x, const Vector& y, double gamma);

// Shrinks toward the fitted values of the submodel made of the given columns
// (0-based; must include column 0, the intercept, and be a proper subset).
ShrinkageFit fit_fvs_submodel(const DesignMatrix& x,
                              const std::vector<Index>& submodel_cols,
                              const Vector& y, double gamma);

// x_new * coefficients.  Out-of-sample predictions depend on the min-norm
// representative when rank(X) < p; in-sample fitted values do not.
Vector predict(const ShrinkageFit& fit, const Matrix& x_new);

}  // namespace fvs::shrinkage
