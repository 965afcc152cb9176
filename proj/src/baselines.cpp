#include "fvs/baselines.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fvs::baselines {

namespace {

// Centered predictor block and the ingredients of the intercept-unpenalized
// ridge solve.  One SVD serves every lambda.
struct CenteredRidge {
  linalg::SvdFactors svd;  // of the centered non-intercept block
  Vector col_means;        // p-1 means of the non-intercept columns
  double y_mean = 0.0;
  Vector uty;              // U' yc

  // b_{-1}(lambda) in the (possibly standardized) basis of the fit.
  Vector slopes(double lambda) const {
    const Eigen::ArrayXd shrink =
        svd.d.array() / (svd.d.array().square() + lambda);
    return svd.v * (shrink * uty.array()).matrix();
  }
};

CenteredRidge prepare(const Matrix& x, const Vector& y) {
  const auto n = x.rows();
  const auto p = x.cols();
  CenteredRidge cr;
  cr.col_means = x.rightCols(p - 1).colwise().mean();
  Matrix xc = x.rightCols(p - 1).rowwise() - cr.col_means.transpose();
  cr.y_mean = y.mean();
  cr.svd = linalg::reduced_svd(xc);
  cr.uty = cr.svd.u.transpose() * (y.array() - cr.y_mean).matrix();
  (void)n;
  return cr;
}

std::vector<linalg::Index> shuffled_indices(linalg::Index n,
                                            probability::RngStream& rng) {
  std::vector<linalg::Index> perm(n);
  std::iota(perm.begin(), perm.end(), linalg::Index{0});
  for (linalg::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<linalg::Index>(
        rng.uniform() * static_cast<double>(i + 1));
    std::swap(perm[i], perm[std::min(j, i)]);
  }
  return perm;
}

}  // namespace

shrinkage::ShrinkageFit ols_fit(const DesignMatrix& x, const Vector& y) {
  return shrinkage::fit_fvs(x, y, 1.0);
}

Matrix standardization_transform(const DesignMatrix& x) {
  const auto n = x.n();
  const auto p = x.p();
  Matrix t = Matrix::Zero(p, p);
  t(0, 0) = 1.0;
  for (linalg::Index j = 1; j < p; ++j) {
    const double mean = x.data().col(j).mean();
    const double sd = std::sqrt(
        (x.data().col(j).array() - mean).square().sum() /
        static_cast<double>(n - 1));
    if (sd <= 1e-12) {
      throw std::runtime_error("standardization_transform: column " +
                               std::to_string(j) +
                               " is constant (zero sample variance)");
    }
    t(0, j) = -mean / sd;
    t(j, j) = 1.0 / sd;
  }
  return t;
}

RidgePathFit ridge_path(const DesignMatrix& x, const Vector& y,
                        const std::vector<double>& lambdas, bool standardize) {
  if (y.size() != x.n()) {
    throw std::invalid_argument("ridge_path: response length mismatch");
  }
  for (double l : lambdas) {
    if (!(l > 0.0)) {
      throw std::invalid_argument("ridge_path: lambda grid must be positive");
    }
  }

  RidgePathFit out;
  out.lambdas = lambdas;
  out.standardized = standardize;

  Matrix basis = x.data();
  Matrix t;
  if (standardize) {
    t = standardization_transform(x);
    out.transform = t;
    basis = x.data() * t;
  }

  const CenteredRidge cr = prepare(basis, y);
  const auto n = x.n();
  const auto p = x.p();
  const auto nl = static_cast<linalg::Index>(lambdas.size());
  out.coefficients.resize(p, nl);
  out.fitted.resize(n, nl);
  for (linalg::Index li = 0; li < nl; ++li) {
    const Vector b1 = cr.slopes(lambdas[li]);
    Vector coef(p);
    coef(0) = cr.y_mean - cr.col_means.dot(b1);
    coef.tail(p - 1) = b1;
    if (standardize) coef = t * coef;
    out.coefficients.col(li) = coef;
    out.fitted.col(li) = x.data() * coef;
  }
  return out;
}

Vector ridge_coefficients_plain(const DesignMatrix& x, const Vector& y,
                                double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("ridge_coefficients_plain: lambda must be > 0");
  }
  // (X'X + lambda M) b = X'y with the first coefficient unpenalized.
  const double alpha = lambda / (2.0 * static_cast<double>(x.n()));
  return linalg::penalized_gram_solve(x, alpha, x.data().transpose() * y);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid(45);
  for (int j = 0; j < 45; ++j) {
    grid[j] = std::pow(10.0, -7.0 + 0.25 * j);
  }
  return grid;
}

RidgeCvFit ridge_cv(const DesignMatrix& x, const Vector& y,
                    const std::vector<double>& lambdas, int folds,
                    probability::RngStream rng, bool standardize) {
  const auto n = x.n();
  const auto p = x.p();
  if (folds < 2 || n < folds) {
    throw std::invalid_argument("ridge_cv: need 2 <= folds <= n");
  }

  Matrix basis = x.data();
  if (standardize) {
    basis = x.data() * standardization_transform(x);
  }

  const auto perm = shuffled_indices(n, rng);
  std::vector<double> total_error(lambdas.size(), 0.0);
  linalg::Index start = 0;
  for (int fold = 0; fold < folds; ++fold) {
    const linalg::Index size =
        n / folds + (fold < static_cast<int>(n % folds) ? 1 : 0);
    const linalg::Index end = start + size;

    std::vector<bool> held(n, false);
    for (linalg::Index i = start; i < end; ++i) held[perm[i]] = true;

    Matrix x_train(n - size, p);
    Vector y_train(n - size);
    Matrix x_val(size, p);
    Vector y_val(size);
    linalg::Index it = 0, iv = 0;
    for (linalg::Index i = 0; i < n; ++i) {
      if (held[i]) {
        x_val.row(iv) = basis.row(i);
        y_val(iv++) = y(i);
      } else {
        x_train.row(it) = basis.row(i);
        y_train(it++) = y(i);
      }
    }

    const CenteredRidge cr = prepare(x_train, y_train);
    const Matrix xc_val =
        x_val.rightCols(p - 1).rowwise() - cr.col_means.transpose();
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      const Vector pred =
          (xc_val * cr.slopes(lambdas[li])).array() + cr.y_mean;
      total_error[li] += (pred - y_val).squaredNorm();
    }
    start = end;
  }

  std::size_t best = 0;
  for (std::size_t li = 1; li < lambdas.size(); ++li) {
    if (total_error[li] < total_error[best]) best = li;
  }

  const RidgePathFit final_fit =
      ridge_path(x, y, {lambdas[best]}, standardize);
  RidgeCvFit out;
  out.lambda = lambdas[best];
  out.coefficients = final_fit.coefficients.col(0);
  out.fitted = final_fit.fitted.col(0);
  return out;
}

}  // namespace fvs::baselines
