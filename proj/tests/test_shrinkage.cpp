#include "fvs/shrinkage.hpp"

#include "fvs/probability.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace fvs::shrinkage;
using fvs::linalg::DesignMatrix;
using fvs::linalg::InterceptPolicy;
using fvs::linalg::Matrix;
using fvs::linalg::Vector;
using oracles::random_design;
using oracles::random_vector;

TEST_SUITE_BEGIN("shrinkage");

TEST_CASE("gamma = 1 reproduces least squares, gamma = 0 the grand mean") {
  const DesignMatrix x{random_design(8, 3, 1)};
  const Vector y = random_vector(8, 2);
  const Vector proj = oracles::dense_projector(x.data()) * y;

  const ShrinkageFit ls = fit_fvs(x, y, 1.0);
  CHECK((ls.fitted - proj).cwiseAbs().maxCoeff() < 1e-10);

  const ShrinkageFit mean_only = fit_fvs(x, y, 0.0);
  CHECK((mean_only.fitted.array() - y.mean()).abs().maxCoeff() < 1e-12);
}

TEST_CASE("interior gamma mixes the OLS fit and the grand mean") {
  const DesignMatrix x{random_design(6, 3, 3)};
  const Vector y = random_vector(6, 4);
  const Vector dense_ols =
      x.data() *
      (x.data().transpose() * x.data()).ldlt().solve(x.data().transpose() * y);
  const ShrinkageFit fit = fit_fvs(x, y, 0.3);
  const Vector expected =
      0.3 * dense_ols + 0.7 * Vector::Constant(6, y.mean());
  CHECK((fit.fitted - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("fit structure invariants") {
  const DesignMatrix x{random_design(10, 4, 5)};
  const Vector y = random_vector(10, 6);
  for (double gamma : {0.0, 0.25, 0.6, 1.0}) {
    const ShrinkageFit fit = fit_fvs(x, y, gamma);
    // fitted = gamma P_X y + (1-gamma) ybar 1.
    const Vector proj = fvs::linalg::projector_apply(x.svd(), y);
    CHECK((fit.fitted -
           (gamma * proj + (1 - gamma) * Vector::Constant(10, y.mean())))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    // X * coefficients reproduces the fitted values.
    CHECK((x.data() * fit.coefficients - fit.fitted).cwiseAbs().maxCoeff() <
          1e-8);
    REQUIRE(fit.sigma_hat2.has_value());
  }
}

TEST_CASE("no residual variance attached in the square case") {
  const Matrix sq = oracles::random_design(4, 4, 7);
  const DesignMatrix x{sq};
  const Vector y = random_vector(4, 8);
  if (x.rank() == 4) {
    CHECK_FALSE(fit_fvs(x, y, 0.5).sigma_hat2.has_value());
  }
}

TEST_CASE("the fitted path is affine in gamma") {
  const DesignMatrix x{random_design(7, 3, 9)};
  const Vector y = random_vector(7, 10);
  const Vector f0 = fit_fvs(x, y, 0.0).fitted;
  const Vector f1 = fit_fvs(x, y, 1.0).fitted;
  for (double gamma : {0.2, 0.5, 0.9}) {
    const Vector fg = fit_fvs(x, y, gamma).fitted;
    CHECK((fg - (gamma * f1 + (1 - gamma) * f0)).cwiseAbs().maxCoeff() <
          1e-12);
  }
}

TEST_CASE("coefficients satisfy the first-order condition of the objective") {
  const DesignMatrix x{random_design(9, 4, 11)};
  const Vector y = random_vector(9, 12);
  for (double gamma : {0.3, 0.7}) {
    const ShrinkageFit fit = fit_fvs(x, y, gamma);
    const Vector xb = x.data() * fit.coefficients;
    const Vector grad =
        x.data().transpose() *
        (gamma * (xb - y) +
         (1 - gamma) * (xb - Vector::Constant(9, y.mean())));
    CHECK(grad.cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("fitted values are invariant to invertible transformations") {
  for (int rep = 0; rep < 4; ++rep) {
    const Matrix base = random_design(12, 5, 100 + rep);
    Matrix t = oracles::random_matrix(5, 5, 200 + rep);
    t += 0.5 * Matrix::Identity(5, 5);
    const DesignMatrix x1{base};
    const DesignMatrix x2(base * t, InterceptPolicy::spanning);
    const Vector y = random_vector(12, 300 + rep);
    for (double gamma : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const Vector f1 = fit_fvs(x1, y, gamma).fitted;
      const Vector f2 = fit_fvs(x2, y, gamma).fitted;
      CHECK((f1 - f2).cwiseAbs().maxCoeff() <=
            1e-7 * y.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("fit_fvs validates inputs") {
  const DesignMatrix x{random_design(6, 3, 13)};
  const Vector y = random_vector(6, 14);
  CHECK_THROWS_AS(fit_fvs(x, y, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(fit_fvs(x, y, 1.1), std::invalid_argument);
  CHECK_THROWS_AS(fit_fvs(x, random_vector(5, 15), 0.5),
                  std::invalid_argument);
  const DesignMatrix intercept_only{Matrix::Ones(6, 1)};
  CHECK_THROWS_AS(fit_fvs(intercept_only, y, 0.5), std::invalid_argument);
}

TEST_CASE("submodel target with only the intercept reduces to fit_fvs") {
  const DesignMatrix x{random_design(8, 4, 17)};
  const Vector y = random_vector(8, 18);
  const ShrinkageFit a = fit_fvs(x, y, 0.4);
  const ShrinkageFit b = fit_fvs_submodel(x, {0}, y, 0.4);
  CHECK((a.fitted - b.fitted).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("submodel target at gamma = 1 is least squares") {
  const DesignMatrix x{random_design(8, 4, 19)};
  const Vector y = random_vector(8, 20);
  const ShrinkageFit fit = fit_fvs_submodel(x, {0, 1}, y, 1.0);
  CHECK((fit.fitted - oracles::dense_projector(x.data()) * y)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("submodel fit matches two dense projections") {
  const Matrix xm = random_design(8, 4, 21);
  const DesignMatrix x{xm};
  const Vector y = random_vector(8, 22);
  const Vector expected = 0.5 * (oracles::dense_projector(xm) * y) +
                          0.5 * (oracles::dense_projector(xm.leftCols(2)) * y);
  const ShrinkageFit fit = fit_fvs_submodel(x, {0, 1}, y, 0.5);
  CHECK((fit.fitted - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((x.data() * fit.coefficients - fit.fitted).cwiseAbs().maxCoeff() <
        1e-8);
}

TEST_CASE("submodel validation") {
  const DesignMatrix x{random_design(8, 4, 23)};
  const Vector y = random_vector(8, 24);
  CHECK_THROWS_AS(fit_fvs_submodel(x, {1, 2}, y, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(fit_fvs_submodel(x, {0, 1, 2, 3}, y, 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_fvs_submodel(x, {}, y, 0.5), std::invalid_argument);

  // Duplicated column: the submodel spans the whole design, rank gap 0.
  Matrix xm = random_design(8, 2, 25);
  Matrix dup(8, 3);
  dup << xm, xm.col(1);
  const DesignMatrix xd{dup};
  CHECK_THROWS_AS(fit_fvs_submodel(xd, {0, 1}, y, 0.5), std::invalid_argument);
}

TEST_CASE("predict on the training design returns the fitted values") {
  const DesignMatrix x{random_design(9, 3, 27)};
  const Vector y = random_vector(9, 28);
  const ShrinkageFit fit = fit_fvs(x, y, 0.35);
  CHECK((predict(fit, x.data()) - fit.fitted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predict at gamma = 0 matches the min-norm oracle") {
  const Matrix xm = random_design(9, 3, 29);
  const DesignMatrix x{xm};
  const Vector y = random_vector(9, 30);
  const ShrinkageFit fit = fit_fvs(x, y, 0.0);
  Matrix x_new = random_design(4, 3, 31);
  const Vector expected =
      x_new * (oracles::dense_pinv(xm) * Vector::Constant(9, y.mean()));
  CHECK((predict(fit, x_new) - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("predict on a single row is a dot product") {
  const DesignMatrix x{random_design(9, 3, 33)};
  const Vector y = random_vector(9, 34);
  const ShrinkageFit fit = fit_fvs(x, y, 0.8);
  Matrix row(1, 3);
  row << 1.0, 2.0, -1.0;
  const double expected = fit.coefficients(0) + 2.0 * fit.coefficients(1) -
                          fit.coefficients(2);
  CHECK(predict(fit, row)(0) == doctest::Approx(expected));
  CHECK_THROWS_AS(predict(fit, Matrix::Ones(2, 4)), std::invalid_argument);
}

TEST_CASE("Monte Carlo risk matches the closed form on a gamma grid") {
  // E||fitted - mu||^2 = sigma^2 (gamma^2 r + 1 - gamma^2)
  //                      + (1-gamma)^2 ||mu - P_1 mu||^2.
  const int n = 40, p = 6, reps = 600;
  const Matrix xm = random_design(n, p, 41);
  const DesignMatrix x{xm};
  Vector beta = random_vector(p, 42);
  const Vector mu = xm * beta;
  const double delta2 = (mu.array() - mu.mean()).square().sum();
  const double r = static_cast<double>(x.rank());

  fvs::probability::RngStream rng(77, 0);
  std::vector<double> gammas = {0.0, 0.2, 0.5, 0.8, 1.0};
  for (double gamma : gammas) {
    fvs::probability::RngStream stream = rng.child(
        static_cast<std::uint64_t>(gamma * 1000));
    double sum = 0.0, sumsq = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      Vector eps(n);
      for (int i = 0; i < n; ++i) eps(i) = stream.normal();
      const Vector y = mu + eps;
      const double loss = (fit_fvs(x, y, gamma).fitted - mu).squaredNorm();
      sum += loss;
      sumsq += loss * loss;
    }
    const double mean = sum / reps;
    const double sd = std::sqrt((sumsq - reps * mean * mean) / (reps - 1));
    const double se = sd / std::sqrt(static_cast<double>(reps));
    const double expected =
        (gamma * gamma * r + 1.0 - gamma * gamma) +
        (1.0 - gamma) * (1.0 - gamma) * delta2;
    CHECK(std::abs(mean - expected) <= 3.0 * se + 1e-9);
  }
}

TEST_SUITE_END();
