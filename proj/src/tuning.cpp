#include "fvs/tuning.hpp"

#include "fvs/shrinkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fvs::tuning {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector intercept_fit(const Vector& y) {
  return Vector::Constant(y.size(), y.mean());
}

double clamp01(double g, bool* clamped) {
  if (g < 0.0) {
    if (clamped) *clamped = true;
    return 0.0;
  }
  if (g > 1.0) {
    if (clamped) *clamped = true;
    return 1.0;
  }
  return g;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::oracle: return "oracle";
    case Method::f_ratio: return "f-ratio";
    case Method::f_ratio_q90: return "f-ratio-q90";
    case Method::f_ratio_q95: return "f-ratio-q95";
    case Method::cv: return "cv";
    case Method::highdim_bar: return "bar";
    case Method::highdim_bar_corrected: return "bar-corrected";
    case Method::submodel_f_ratio: return "submodel-f-ratio";
    case Method::submodel_oracle: return "submodel-oracle";
  }
  return "?";
}

double sigma_hat2(const DesignMatrix& x, const Vector& y) {
  if (y.size() != x.n()) {
    throw std::invalid_argument("sigma_hat2: response length mismatch");
  }
  const Index r = x.rank();
  if (x.n() <= r) {
    throw std::invalid_argument(
        "sigma_hat2: requires n > rank(X); with rank(X) = n the error "
        "variance is not identifiable (use the high-dimensional estimator)");
  }
  const Vector resid = y - linalg::projector_apply(x.svd(), y);
  return resid.squaredNorm() / static_cast<double>(x.n() - r);
}

double f_statistic(const DesignMatrix& x, const Vector& y) {
  const Index r = x.rank();
  if (r < 2) {
    throw std::invalid_argument("f_statistic: rank(X) >= 2 required");
  }
  const double numerator =
      (linalg::projector_apply(x.svd(), y) - intercept_fit(y)).squaredNorm();
  // A constant response leaves only rounding noise in both the numerator and
  // the residual; that is the F = 0 case, not 0/0.
  if (numerator <= 1e-20 * std::max(1.0, y.squaredNorm())) return 0.0;
  const double s2 = sigma_hat2(x, y);
  if (s2 == 0.0) return kInf;
  return numerator / (s2 * static_cast<double>(r - 1));
}

double gamma_hat(double f) {
  if (std::isnan(f) || f < 0.0) {
    throw std::invalid_argument("gamma_hat: F must be nonnegative");
  }
  if (f == kInf) return 1.0;
  return f > 1.0 ? 1.0 - 1.0 / f : 0.0;
}

double gamma_hat_thresholded(double f, ThresholdLevel level, int d1, int d2) {
  if (std::isnan(f) || f < 0.0) {
    throw std::invalid_argument("gamma_hat_thresholded: F must be nonnegative");
  }
  if (f == kInf) return 1.0;
  const double q = level == ThresholdLevel::q90 ? 0.9 : 0.95;
  const double fq = probability::f_quantile(q, d1, d2);
  // The indicator is 1(F >= f_q): the boundary is inclusive.
  if (f < fq) return 0.0;
  return std::max(0.0, 1.0 - 1.0 / f);
}

double gamma_opt(double delta2, double sigma2, Index r) {
  if (delta2 < 0.0) throw std::invalid_argument("gamma_opt: delta2 < 0");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("gamma_opt: sigma2 <= 0");
  if (r < 2) throw std::invalid_argument("gamma_opt: rank must be >= 2");
  return delta2 / (sigma2 * static_cast<double>(r - 1) + delta2);
}

TuningResult gamma_tilde_submodel(const DesignMatrix& x,
                                  const std::vector<Index>& submodel_cols,
                                  const Vector& y,
                                  std::optional<ThresholdLevel> thresholded) {
  linalg::Matrix x0(x.n(), static_cast<Index>(submodel_cols.size()));
  for (std::size_t j = 0; j < submodel_cols.size(); ++j) {
    x0.col(static_cast<Index>(j)) = x.data().col(submodel_cols[j]);
  }
  const linalg::SvdFactors svd0 = linalg::reduced_svd(x0);
  const Index r = x.rank();
  const Index r0 = svd0.rank();
  if (r - r0 < 1) {
    throw std::invalid_argument(
        "gamma_tilde_submodel: rank(X) - rank(X0) >= 1 required");
  }

  const double numerator = (linalg::projector_apply(x.svd(), y) -
                            linalg::projector_apply(svd0, y))
                               .squaredNorm();
  double f;
  if (numerator <= 1e-20 * std::max(1.0, y.squaredNorm())) {
    f = 0.0;
  } else {
    const double s2 = sigma_hat2(x, y);
    f = s2 == 0.0 ? kInf : numerator / (s2 * static_cast<double>(r - r0));
  }

  TuningResult out;
  out.f_stat = f;
  if (thresholded) {
    out.method = Method::submodel_f_ratio;
    out.gamma = gamma_hat_thresholded(f, *thresholded,
                                      static_cast<int>(r - r0),
                                      static_cast<int>(x.n() - r));
  } else {
    out.method = Method::submodel_f_ratio;
    out.gamma = gamma_hat(f);
  }
  if (x.n() > r) out.sigma2_estimate = sigma_hat2(x, y);
  return out;
}

Vector k_matrix_apply(const DesignMatrix& x, double alpha, const Vector& y) {
  if (y.size() != x.n()) {
    throw std::invalid_argument("k_matrix_apply: response length mismatch");
  }
  const Vector z =
      linalg::penalized_gram_solve(x, alpha, x.data().transpose() * y);
  return x.data() * z;
}

double k_matrix_trace(const DesignMatrix& x, double alpha) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("k_matrix_trace: alpha must be > 0");
  }
  const linalg::SvdFactors& svd = x.svd();
  const double c = 2.0 * static_cast<double>(x.n()) * alpha;
  // With A = X'X + cI, trace(X A^-1 X') = sum d_i^2/(d_i^2 + c); the
  // Sherman-Morrison downdate for the unpenalized intercept adds
  // c ||X A^-1 e1||^2 / (1 - c e1'A^-1 e1).
  const Eigen::ArrayXd d2c = svd.d.array().square() + c;
  const double base = (svd.d.array().square() / d2c).sum();
  const Eigen::ArrayXd v1d =
      svd.v.row(0).transpose().array() * svd.d.array();
  const double col0_sq = v1d.square().sum();
  const double d_max = svd.d.size() > 0 ? svd.d(0) : 0.0;
  if (col0_sq <= 1e-12 * std::max(1.0, d_max * d_max)) {
    throw std::runtime_error("k_matrix_trace: degenerate intercept direction");
  }
  const double denom = (v1d.square() / d2c).sum();
  const double xainv_e1_sq = (v1d.square() / d2c.square()).sum();
  return base + c * xainv_e1_sq / denom;
}

double sigma_check2(const DesignMatrix& x, const Vector& y, double alpha,
                    bool corrected) {
  const Vector ky = k_matrix_apply(x, alpha, y);
  double s2 = (y.squaredNorm() - y.dot(ky)) / static_cast<double>(x.n());
  s2 = std::max(s2, 0.0);
  if (corrected) {
    const double c_factor =
        1.0 - k_matrix_trace(x, alpha) / static_cast<double>(x.rank());
    if (c_factor <= 1e-10) {
      throw std::runtime_error(
          "sigma_check2: correction factor C = 1 - tr(K)/rank(X) is "
          "numerically zero");
    }
    s2 /= c_factor;
  }
  return s2;
}

double alpha_schedule(double t, const Vector& y, Index n) {
  const double ss = (y.array() - y.mean()).square().sum();
  if (ss <= 0.0) {
    throw std::invalid_argument(
        "alpha_schedule: response is constant, ||y - P_1 y||^2 = 0");
  }
  return std::pow(static_cast<double>(n), t) / (2.0 * ss);
}

TuningResult gamma_bar(const DesignMatrix& x, const Vector& y, double alpha,
                       bool corrected) {
  if (x.rank() < 2) {
    throw std::invalid_argument("gamma_bar: rank(X) >= 2 required");
  }
  const double r = static_cast<double>(x.rank());
  const double ss1 = (y.array() - y.mean()).square().sum();  // y'(I-P1)y
  if (ss1 <= 0.0) {
    throw std::invalid_argument("gamma_bar: response is constant");
  }
  const Vector ky = k_matrix_apply(x, alpha, y);
  const double ssk = y.squaredNorm() - y.dot(ky);  // y'(I-K)y

  TuningResult out;
  out.alpha = alpha;
  double g;
  if (corrected) {
    const double tr = k_matrix_trace(x, alpha);
    if (r - tr <= 1e-10) {
      throw std::runtime_error(
          "gamma_bar: rank(X) - trace(K) is numerically zero");
    }
    g = std::max(0.0, (ss1 - (r - 1.0) / (r - tr) * ssk) / ss1);
    out.method = Method::highdim_bar_corrected;
    out.sigma2_estimate = sigma_check2(x, y, alpha, true);
  } else {
    g = (ss1 - (r - 1.0) / r * ssk) / ss1;
    out.method = Method::highdim_bar;
    out.sigma2_estimate = sigma_check2(x, y, alpha, false);
  }
  out.gamma = clamp01(g, &out.clamped);
  return out;
}

TuningResult cv_gamma(const DesignMatrix& x, const Vector& y, int folds,
                      const std::vector<double>& grid,
                      probability::RngStream rng) {
  const Index n = x.n();
  if (folds < 2) throw std::invalid_argument("cv_gamma: folds must be >= 2");
  if (n < folds) throw std::invalid_argument("cv_gamma: n < folds");
  if (grid.empty()) throw std::invalid_argument("cv_gamma: empty gamma grid");
  for (double g : grid) {
    if (!(g >= 0.0 && g <= 1.0)) {
      throw std::invalid_argument("cv_gamma: grid values must lie in [0, 1]");
    }
  }

  // Random permutation partition into folds of equal size up to remainder.
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(perm[i], perm[std::min(j, i)]);
  }

  std::vector<double> total_error(grid.size(), 0.0);
  Index start = 0;
  for (int fold = 0; fold < folds; ++fold) {
    const Index size = n / folds + (fold < static_cast<int>(n % folds) ? 1 : 0);
    const Index end = start + size;

    std::vector<bool> held(n, false);
    for (Index i = start; i < end; ++i) held[perm[i]] = true;

    linalg::Matrix x_train(n - size, x.p());
    Vector y_train(n - size);
    linalg::Matrix x_val(size, x.p());
    Vector y_val(size);
    Index it = 0, iv = 0;
    for (Index i = 0; i < n; ++i) {
      if (held[i]) {
        x_val.row(iv) = x.data().row(i);
        y_val(iv++) = y(i);
      } else {
        x_train.row(it) = x.data().row(i);
        y_train(it++) = y(i);
      }
    }

    const DesignMatrix train(std::move(x_train), linalg::InterceptPolicy::spanning);
    if (train.rank() < 2) {
      throw std::runtime_error("cv_gamma: a fold's training design has rank < 2");
    }
    // Min-norm coefficients are affine in gamma:
    //   b(gamma) = gamma * X^-(y - ybar 1) + ybar X^- 1,
    // so validation predictions are evaluated from two fixed vectors.
    const linalg::SvdFactors& svd = train.svd();
    const double ybar = y_train.mean();
    const Vector slope = linalg::pseudoinverse_apply(
        svd, Vector(y_train.array() - ybar));
    const Vector base = ybar * linalg::pseudoinverse_apply(
                                   svd, Vector::Ones(train.n()));
    const Vector pred_slope = x_val * slope;
    const Vector pred_base = x_val * base;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      total_error[gi] +=
          (grid[gi] * pred_slope + pred_base - y_val).squaredNorm();
    }
    start = end;
  }

  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi) {
    if (total_error[gi] < total_error[best]) best = gi;
  }
  TuningResult out;
  out.method = Method::cv;
  out.gamma = grid[best];
  return out;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> grid(100);
  for (int k = 0; k < 100; ++k) grid[k] = static_cast<double>(k) / 99.0;
  return grid;
}

}  // namespace fvs::tuning
