#include "fvs/linalg.hpp"

#include <lapacke.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fvs::linalg {

namespace {

// LAPACK divide-and-conquer thin SVD of a column-major matrix.
void lapack_gesdd(const Matrix& a, Matrix& u, Vector& s, Matrix& v) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  Matrix work = a;
  u.resize(m, k);
  s.resize(k);
  Matrix vt(k, n);
  const lapack_int info =
      LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', m, n, work.data(), m, s.data(),
                     u.data(), m, vt.data(), k);
  if (info != 0) {
    std::ostringstream msg;
    msg << "reduced_svd: dgesdd failed to converge (info=" << info << ") on a "
        << m << "x" << n << " matrix";
    throw std::runtime_error(msg.str());
  }
  v = vt.transpose();
}

// Symmetric eigendecomposition of the small Gram matrix.  Much cheaper than a
// direct SVD for strongly rectangular inputs; accurate whenever the retained
// spectrum is not close to the truncation threshold, which holds for the
// large simulated designs this path serves.
void gram_svd(const Matrix& a, Matrix& u, Vector& s, Matrix& v) {
  const bool wide = a.cols() > a.rows();
  const Index k = wide ? a.rows() : a.cols();
  Matrix g = Matrix::Zero(k, k);
  if (wide) {
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);
  } else {
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  }
  Vector w(k);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(k),
                     g.data(), static_cast<lapack_int>(k), w.data());
  if (info != 0) {
    std::ostringstream msg;
    msg << "reduced_svd: dsyevd failed (info=" << info << ") on the "
        << a.rows() << "x" << a.cols() << " matrix's Gram form";
    throw std::runtime_error(msg.str());
  }
  // Eigenvalues come back ascending; emit descending singular values.
  Matrix evec(k, k);
  s.resize(k);
  for (Index j = 0; j < k; ++j) {
    s(j) = std::sqrt(std::max(w(k - 1 - j), 0.0));
    evec.col(j) = g.col(k - 1 - j);
  }
  // Recover the other factor only for directions that will survive
  // truncation (a contiguous prefix, since s is descending); one blocked
  // product instead of per-column GEMVs.
  const double d_max = s.size() > 0 ? s(0) : 0.0;
  const double tiny = default_rank_tol(a.rows(), a.cols(), d_max);
  Index live = 0;
  while (live < k && s(live) > tiny) ++live;
  Matrix scaled =
      evec.leftCols(live) * s.head(live).cwiseInverse().asDiagonal();
  if (wide) {
    u = std::move(evec);
    v = Matrix::Zero(a.cols(), k);
    v.leftCols(live) = a.transpose() * scaled;
  } else {
    v = std::move(evec);
    u = Matrix::Zero(a.rows(), k);
    u.leftCols(live) = a * scaled;
  }
}

bool use_gram_route(Index n, Index p) {
  const Index lo = std::min(n, p);
  const Index hi = std::max(n, p);
  return lo >= 1024 && hi >= 2 * lo;
}

}  // namespace

double default_rank_tol(Index n, Index p, double d_max) {
  return static_cast<double>(std::max(n, p)) * d_max * std::ldexp(1.0, -45);
}

SvdFactors reduced_svd(const Matrix& a, double rank_tol) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw std::invalid_argument("reduced_svd: empty matrix");
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("reduced_svd: matrix has non-finite entries");
  }

  Matrix u, v;
  Vector s;
  if (use_gram_route(a.rows(), a.cols())) {
    gram_svd(a, u, s, v);
  } else if (a.cols() > a.rows()) {
    // Decompose the transpose so the factor cost stays O(n p min(n,p)).
    lapack_gesdd(a.transpose(), v, s, u);
  } else {
    lapack_gesdd(a, u, s, v);
  }

  const double d_max = s.size() > 0 ? s(0) : 0.0;
  const double tol =
      rank_tol >= 0.0 ? rank_tol : default_rank_tol(a.rows(), a.cols(), d_max);
  Index q = 0;
  while (q < s.size() && s(q) > tol) ++q;

  SvdFactors f;
  f.rank_tol = tol;
  if (q == s.size()) {
    f.u = std::move(u);
    f.d = std::move(s);
    f.v = std::move(v);
  } else {
    f.u = u.leftCols(q);
    f.d = s.head(q);
    f.v = v.leftCols(q);
  }
  return f;
}

Vector pseudoinverse_apply(const SvdFactors& svd, const Vector& y) {
  if (y.size() != svd.u.rows()) {
    throw std::invalid_argument("pseudoinverse_apply: vector length " +
                                std::to_string(y.size()) + " != n = " +
                                std::to_string(svd.u.rows()));
  }
  return svd.v * (svd.d.cwiseInverse().asDiagonal() * (svd.u.transpose() * y));
}

Vector projector_apply(const SvdFactors& svd, const Vector& y) {
  if (y.size() != svd.u.rows()) {
    throw std::invalid_argument("projector_apply: vector length " +
                                std::to_string(y.size()) + " != n = " +
                                std::to_string(svd.u.rows()));
  }
  return svd.u * (svd.u.transpose() * y);
}

Matrix gram_schmidt(const Matrix& a) {
  const Index p = a.cols();
  Matrix t = a;
  for (Index j = 0; j < p; ++j) {
    // Two orthogonalization sweeps; one sweep of classical/modified GS is not
    // enough to keep T'T = I at p in the hundreds.
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (Index k = 0; k < j; ++k) {
        t.col(j) -= t.col(k).dot(t.col(j)) * t.col(k);
      }
    }
    const double pivot = t.col(j).norm();
    const double scale = std::max(1.0, a.col(j).norm());
    if (pivot <= 1e-12 * scale) {
      throw std::runtime_error(
          "gram_schmidt: column " + std::to_string(j) +
          " is numerically dependent on the preceding columns");
    }
    t.col(j) /= pivot;
  }
  return t;
}

DesignMatrix::DesignMatrix(Matrix data, InterceptPolicy policy, double rank_tol)
    : data_(std::move(data)),
      rank_tol_(rank_tol),
      cache_(std::make_shared<SvdCache>()) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw std::invalid_argument("DesignMatrix: empty matrix");
  }
  if (!data_.allFinite()) {
    throw std::invalid_argument("DesignMatrix: non-finite entries");
  }
  if (policy == InterceptPolicy::require_ones) {
    if ((data_.col(0).array() != 1.0).any()) {
      throw std::invalid_argument(
          "DesignMatrix: first column must be identically one");
    }
  }
}

const SvdFactors& DesignMatrix::svd() const {
  std::call_once(cache_->once, [this] {
    cache_->factors =
        std::make_unique<const SvdFactors>(reduced_svd(data_, rank_tol_));
  });
  return *cache_->factors;
}

Vector penalized_gram_solve(const DesignMatrix& x, double alpha,
                            const Vector& b) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("penalized_gram_solve: alpha must be > 0");
  }
  if (b.size() != x.p()) {
    throw std::invalid_argument("penalized_gram_solve: rhs length " +
                                std::to_string(b.size()) + " != p = " +
                                std::to_string(x.p()));
  }
  const SvdFactors& svd = x.svd();
  const double c = 2.0 * static_cast<double>(x.n()) * alpha;

  // A = X'X + cI; A^-1 w = V diag(1/(d^2+c)) V'w + (w - V V'w)/c.  At full
  // column rank the complement is exactly empty; forming it anyway would
  // amplify rounding noise by 1/c.
  const bool full_column_rank = svd.rank() == x.p();
  const Vector inv_diag =
      (svd.d.array().square() + c).inverse().matrix();
  auto apply_ainv = [&](const Vector& w) -> Vector {
    const Vector vw = svd.v.transpose() * w;
    Vector out = svd.v * (inv_diag.asDiagonal() * vw);
    if (!full_column_rank) out += (w - svd.v * vw) / c;
    return out;
  };

  // Sherman-Morrison removes the penalty on the intercept coefficient:
  // (A - c e1 e1')^-1 b = A^-1 b + c A^-1 e1 (e1' A^-1 b) / (1 - c e1'A^-1 e1).
  // The denominator equals sum_i v1i^2 d_i^2 / (d_i^2 + c), a sum of
  // nonnegative terms; evaluating it in that form avoids the cancellation of
  // the 1 - c(...) expression when c is huge.  It vanishes only when the
  // intercept column itself is numerically zero.
  const Vector ainv_b = apply_ainv(b);
  Vector e1 = Vector::Zero(x.p());
  e1(0) = 1.0;
  const Vector ainv_e1 = apply_ainv(e1);
  const Eigen::ArrayXd v1d = svd.v.row(0).transpose().array() * svd.d.array();
  const double col0_sq = v1d.square().sum();  // ||X e1||^2
  const double d_max = svd.d.size() > 0 ? svd.d(0) : 0.0;
  if (col0_sq <= 1e-12 * std::max(1.0, d_max * d_max)) {
    throw std::runtime_error(
        "penalized_gram_solve: degenerate intercept direction "
        "(downdate denominator ~ 0)");
  }
  const double denom =
      (v1d.square() / (svd.d.array().square() + c)).sum();
  return ainv_b + (c * ainv_b(0) / denom) * ainv_e1;
}

}  // namespace fvs::linalg
