#pragma once

#include <Eigen/Dense>

#include <memory>
#include <mutex>
#include <vector>

namespace fvs::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Reduced SVD a = u * diag(d) * v' truncated at the numerical rank q.
// Invariants: u'u = v'v = I_q, d strictly positive and descending.
struct SvdFactors {
  Matrix u;         // n x q
  Vector d;         // q singular values, descending
  Matrix v;         // p x q
  double rank_tol;  // threshold below which singular values were dropped

  Index rank() const { return d.size(); }
};

// Truncation threshold max(n,p) * d_max * 2^-45, the usual numerical-rank
// convention scaled a little loose of machine precision.
double default_rank_tol(Index n, Index p, double d_max);

// rank_tol < 0 selects the default policy.
SvdFactors reduced_svd(const Matrix& a, double rank_tol = -1.0);

// V D^-1 U' y: the minimum 2-norm least-squares solution.
Vector pseudoinverse_apply(const SvdFactors& svd, const Vector& y);

// U U' y: orthogonal projection onto the column span.
Vector projector_apply(const SvdFactors& svd, const Vector& y);

// Modified Gram-Schmidt with re-orthogonalization; throws on numerically
// rank-deficient input, naming the failing column.
Matrix gram_schmidt(const Matrix& a);

// A design matrix whose first column is the intercept (all ones).  The
// spanning policy admits transformed designs X*T whose first column is no
// longer ones but whose span still contains it.
enum class InterceptPolicy { require_ones, spanning };

class DesignMatrix {
 public:
  explicit DesignMatrix(Matrix data,
                        InterceptPolicy policy = InterceptPolicy::require_ones,
                        double rank_tol = -1.0);

  Index n() const { return data_.rows(); }
  Index p() const { return data_.cols(); }
  const Matrix& data() const { return data_; }

  // Cached reduced SVD; computed at most once, safe under concurrent callers.
  const SvdFactors& svd() const;
  Index rank() const { return svd().rank(); }

 private:
  struct SvdCache {
    std::once_flag once;
    std::unique_ptr<const SvdFactors> factors;
  };

  Matrix data_;
  double rank_tol_;
  std::shared_ptr<SvdCache> cache_;
};

// Solves (X'X + 2 n alpha M) z = b with M = diag(0,1,...,1).  The ridge part
// (X'X + 2 n alpha I) is inverted through the cached SVD and the intercept
// column's penalty is removed by a Sherman-Morrison rank-one downdate.
Vector penalized_gram_solve(const DesignMatrix& x, double alpha,
                            const Vector& b);

}  // namespace fvs::linalg
