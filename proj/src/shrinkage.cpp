#include "fvs/shrinkage.hpp"

#include <algorithm>
#include <stdexcept>

namespace fvs::shrinkage {

namespace {

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("fit_fvs: gamma must lie in [0, 1]");
  }
}

void check_rank2(const DesignMatrix& x) {
  if (x.rank() < 2) {
    throw std::invalid_argument(
        "fit_fvs: rank(X) >= 2 required (an intercept-only design has "
        "nothing to shrink)");
  }
}

std::optional<double> residual_variance(const DesignMatrix& x, const Vector& y,
                                        const Vector& proj_y) {
  const Index r = x.rank();
  if (x.n() <= r) return std::nullopt;
  return (y - proj_y).squaredNorm() / static_cast<double>(x.n() - r);
}

ShrinkageFit finish_fit(const DesignMatrix& x, const Vector& y, double gamma,
                        const Vector& target_fit) {
  const linalg::SvdFactors& svd = x.svd();
  const Vector proj_y = linalg::projector_apply(svd, y);
  ShrinkageFit fit;
  fit.gamma = gamma;
  fit.fitted = gamma * proj_y + (1.0 - gamma) * target_fit;
  fit.coefficients =
      linalg::pseudoinverse_apply(svd, gamma * y + (1.0 - gamma) * target_fit);
  fit.sigma_hat2 = residual_variance(x, y, proj_y);
  return fit;
}

}  // namespace

ShrinkageFit fit_fvs(const DesignMatrix& x, const Vector& y, double gamma) {
  check_gamma(gamma);
  if (y.size() != x.n()) {
    throw std::invalid_argument("fit_fvs: response length mismatch");
  }
  check_rank2(x);
  const double ybar = y.mean();
  ShrinkageFit fit =
      finish_fit(x, y, gamma, Vector::Constant(x.n(), ybar));
  fit.target = TargetKind::intercept;
  return fit;
}

ShrinkageFit fit_fvs_submodel(const DesignMatrix& x,
                              const std::vector<Index>& submodel_cols,
                              const Vector& y, double gamma) {
  check_gamma(gamma);
  if (y.size() != x.n()) {
    throw std::invalid_argument("fit_fvs_submodel: response length mismatch");
  }
  if (submodel_cols.empty() ||
      static_cast<Index>(submodel_cols.size()) >= x.p()) {
    throw std::invalid_argument(
        "fit_fvs_submodel: submodel must be a nonempty proper subset of the "
        "columns");
  }
  if (std::find(submodel_cols.begin(), submodel_cols.end(), Index{0}) ==
      submodel_cols.end()) {
    throw std::invalid_argument(
        "fit_fvs_submodel: submodel must contain column 0 (the intercept)");
  }
  for (Index c : submodel_cols) {
    if (c < 0 || c >= x.p()) {
      throw std::invalid_argument("fit_fvs_submodel: column index " +
                                  std::to_string(c) + " out of range");
    }
  }
  check_rank2(x);

  Matrix x0(x.n(), static_cast<Index>(submodel_cols.size()));
  for (std::size_t j = 0; j < submodel_cols.size(); ++j) {
    x0.col(static_cast<Index>(j)) = x.data().col(submodel_cols[j]);
  }
  const linalg::SvdFactors svd0 = linalg::reduced_svd(x0);
  if (x.rank() - svd0.rank() < 1) {
    throw std::invalid_argument(
        "fit_fvs_submodel: rank(X) - rank(X0) >= 1 required");
  }

  ShrinkageFit fit =
      finish_fit(x, y, gamma, linalg::projector_apply(svd0, y));
  fit.target = TargetKind::submodel;
  fit.target_columns = submodel_cols;
  return fit;
}

Vector predict(const ShrinkageFit& fit, const Matrix& x_new) {
  if (x_new.cols() != fit.coefficients.size()) {
    throw std::invalid_argument(
        "predict: design has " + std::to_string(x_new.cols()) +
        " columns but the fit has " + std::to_string(fit.coefficients.size()) +
        " coefficients");
  }
  return x_new * fit.coefficients;
}

}  // namespace fvs::shrinkage
