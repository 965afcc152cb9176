#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace fvs::probability {

// Seeded, splittable random stream.  A stream is fully determined by
// (seed, stream_id), so parallel replications each own a stream and the
// produced draws do not depend on scheduling.  All variates are generated
// from explicitly specified algorithms (never std::*_distribution, whose
// output is implementation-defined), so sequences are reproducible across
// platforms as well.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Derives an independent stream keyed on this stream's identity; the
  // child's draws do not depend on how far 'this' has advanced.
  RngStream child(std::uint64_t key) const;

  std::uint64_t next_u64();
  double uniform();                 // [0, 1)
  double uniform(double a, double b);
  double normal();                  // standard normal, Box-Muller
  int categorical(const std::vector<double>& cum);  // index into cumulative

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Lower-triangular L with L L' = Sigma, Sigma_jk = rho^|j-k|.
Eigen::MatrixXd ar1_chol(int p, double rho);

// Central F distribution through the regularized incomplete beta function.
double f_cdf(double x, int d1, int d2);
double f_quantile(double q, int d1, int d2);

// Student-t quantile (used for paired confidence intervals); obtained from
// the F quantile through T^2 ~ F(1, dof).
double student_t_quantile(double q, int dof);

// n rows iid N(0, chol * chol').
Eigen::MatrixXd sample_gaussian_rows(RngStream& rng, int n,
                                     const Eigen::MatrixXd& chol);

// n labels in {1..k} with the given probabilities.
std::vector<int> sample_multinomial_categories(RngStream& rng, int n, int k,
                                               const std::vector<double>& probs);

}  // namespace fvs::probability
