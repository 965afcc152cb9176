#include "fvs/probability.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <thread>

using namespace fvs::probability;

TEST_SUITE_BEGIN("probability");

TEST_CASE("ar1_chol trivial and 2x2 hand case") {
  CHECK(ar1_chol(1, 0.3)(0, 0) == doctest::Approx(1.0));
  const Eigen::MatrixXd l = ar1_chol(2, 0.5);
  CHECK(l(0, 0) == doctest::Approx(1.0));
  CHECK(l(0, 1) == doctest::Approx(0.0));
  CHECK(l(1, 0) == doctest::Approx(0.5));
  CHECK(l(1, 1) == doctest::Approx(std::sqrt(0.75)));
}

TEST_CASE("ar1_chol reconstructs the covariance") {
  const int p = 10;
  const Eigen::MatrixXd l = ar1_chol(p, 0.5);
  const Eigen::MatrixXd sigma = l * l.transpose();
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < p; ++k) {
      CHECK(std::abs(sigma(j, k) - std::pow(0.5, std::abs(j - k))) < 1e-10);
    }
  }
}

TEST_CASE("ar1_chol rejects |rho| >= 1") {
  CHECK_THROWS_AS(ar1_chol(3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ar1_chol(3, -1.5), std::invalid_argument);
}

TEST_CASE("f_quantile: median of the symmetric case is 1") {
  CHECK(f_quantile(0.5, 7, 7) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("f_quantile frozen values from the quadrature oracle") {
  // Verified against direct quadrature of the beta density.
  CHECK(f_quantile(0.95, 2, 10) ==
        doctest::Approx(4.1028210151304005).epsilon(1e-8));
  // Degrees of freedom used at (n, p) = (300, 75): (rank-1, n-rank).
  CHECK(f_quantile(0.9, 74, 225) ==
        doctest::Approx(1.2621742552461224).epsilon(1e-8));
  CHECK(f_quantile(0.9, 1, 1) ==
        doctest::Approx(39.86345818906144).epsilon(1e-8));
}

TEST_CASE("f_quantile agrees with the quadrature oracle across df") {
  for (int d1 : {1, 2, 5, 74, 150, 300}) {
    for (int d2 : {1, 3, 10, 225, 300}) {
      for (double q : {0.9, 0.95}) {
        const double ours = f_quantile(q, d1, d2);
        const double ref = oracles::f_quantile(q, d1, d2);
        CHECK(std::abs(ours - ref) <= 1e-6 * std::max(1.0, ref));
      }
    }
  }
}

TEST_CASE("f_quantile inverts f_cdf") {
  for (int d1 : {1, 3, 20, 120}) {
    for (int d2 : {2, 9, 240}) {
      for (double q : {0.05, 0.25, 0.5, 0.8, 0.9, 0.95, 0.999}) {
        const double x = f_quantile(q, d1, d2);
        CHECK(std::abs(f_cdf(x, d1, d2) - q) < 1e-7);
      }
    }
  }
}

TEST_CASE("f_quantile reciprocal symmetry") {
  for (int d : {2, 7, 31, 144}) {
    for (double q : {0.6, 0.75, 0.9, 0.95}) {
      CHECK(f_quantile(q, d, d) * f_quantile(1.0 - q, d, d) ==
            doctest::Approx(1.0).epsilon(1e-7));
    }
  }
}

TEST_CASE("f_quantile rejects bad arguments") {
  CHECK_THROWS_AS(f_quantile(0.0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(f_quantile(1.0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(f_quantile(0.5, 0, 2), std::invalid_argument);
}

TEST_CASE("student_t_quantile frozen value") {
  CHECK(student_t_quantile(0.975, 49) ==
        doctest::Approx(2.0095752371292397).epsilon(1e-8));
  CHECK(student_t_quantile(0.5, 11) == doctest::Approx(0.0));
  CHECK(student_t_quantile(0.025, 49) ==
        doctest::Approx(-2.0095752371292397).epsilon(1e-8));
}

TEST_CASE("streams are deterministic and splittable") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 8);
  RngStream d(42, 7);
  bool different = false;
  for (int i = 0; i < 10; ++i) different |= (c.next_u64() != d.next_u64());
  CHECK(different);

  // Children do not depend on the parent's consumption state.
  RngStream p1(1, 2);
  RngStream p2(1, 2);
  (void)p2.normal();
  RngStream c1 = p1.child(5);
  RngStream c2 = p2.child(5);
  for (int i = 0; i < 20; ++i) CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("streams reproduce across threads") {
  std::vector<std::uint64_t> main_draws(50);
  {
    RngStream s(9, 3);
    for (auto& v : main_draws) v = s.next_u64();
  }
  std::vector<std::uint64_t> thread_draws(50);
  std::thread worker([&thread_draws] {
    RngStream s(9, 3);
    for (auto& v : thread_draws) v = s.next_u64();
  });
  worker.join();
  CHECK(main_draws == thread_draws);
}

TEST_CASE("sample_gaussian_rows: zero factor gives zeros") {
  RngStream rng(3, 1);
  const Eigen::MatrixXd z =
      sample_gaussian_rows(rng, 10, Eigen::MatrixXd::Zero(3, 3));
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample_gaussian_rows: AR(1) correlation law of large numbers") {
  RngStream rng(5, 1);
  const int n = 100000;
  const Eigen::MatrixXd z = sample_gaussian_rows(rng, n, ar1_chol(2, 0.5));
  const Eigen::VectorXd c0 = z.col(0).array() - z.col(0).mean();
  const Eigen::VectorXd c1 = z.col(1).array() - z.col(1).mean();
  const double corr = c0.dot(c1) / std::sqrt(c0.squaredNorm() * c1.squaredNorm());
  CHECK(std::abs(corr - 0.5) < 0.01);
}

TEST_CASE("sample_gaussian_rows is reproducible per stream") {
  RngStream a(11, 4);
  RngStream b(11, 4);
  const auto chol = ar1_chol(3, 0.5);
  CHECK((sample_gaussian_rows(a, 20, chol) - sample_gaussian_rows(b, 20, chol))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("sample_multinomial_categories basics") {
  RngStream rng(13, 2);
  const auto one = sample_multinomial_categories(rng, 50, 1, {1.0});
  for (int l : one) CHECK(l == 1);

  const std::vector<double> equal(5, 0.2);
  const auto labels = sample_multinomial_categories(rng, 100000, 5, equal);
  std::vector<int> counts(5, 0);
  for (int l : labels) {
    REQUIRE(l >= 1);
    REQUIRE(l <= 5);
    ++counts[l - 1];
  }
  for (int c : counts) {
    CHECK(std::abs(c / 100000.0 - 0.2) < 0.01);
  }

  CHECK_THROWS_AS(sample_multinomial_categories(rng, 5, 2, {-0.2, 1.2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_multinomial_categories(rng, 5, 2, {0.3, 0.3}),
                  std::invalid_argument);
}

TEST_SUITE_END();
