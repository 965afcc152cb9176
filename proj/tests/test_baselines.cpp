#include "fvs/baselines.hpp"

#include "fvs/simhub.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <chrono>

using namespace fvs::baselines;
using fvs::linalg::DesignMatrix;
using fvs::linalg::InterceptPolicy;
using fvs::linalg::Matrix;
using fvs::linalg::Vector;
using fvs::probability::RngStream;
using oracles::random_design;
using oracles::random_vector;

TEST_SUITE_BEGIN("baselines");

TEST_CASE("ols_fit is fit_fvs at gamma = 1") {
  const DesignMatrix x{random_design(7, 3, 1)};
  const Vector y = random_vector(7, 2);
  const auto ols = ols_fit(x, y);
  const auto fvs1 = fvs::shrinkage::fit_fvs(x, y, 1.0);
  CHECK((ols.fitted - fvs1.fitted).norm() == 0.0);
  CHECK((ols.coefficients - fvs1.coefficients).norm() == 0.0);
}

TEST_CASE("ols_fit matches dense normal equations on a full-rank design") {
  const Matrix xm = random_design(5, 2, 3);
  const DesignMatrix x{xm};
  const Vector y = random_vector(5, 4);
  const Vector expected =
      (xm.transpose() * xm).ldlt().solve(xm.transpose() * y);
  CHECK((ols_fit(x, y).coefficients - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ols fitted values are the projection even for orthogonal noise") {
  const Matrix xm = random_design(8, 3, 5);
  const DesignMatrix x{xm};
  const Vector w = random_vector(8, 6);
  const Vector y = w - oracles::dense_projector(xm) * w;  // y orthogonal to span
  CHECK(ols_fit(x, y).fitted.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardization_transform entries") {
  Matrix xm(4, 2);
  xm << 1, 1, 1, 3, 1, 3, 1, 5;
  const DesignMatrix x{xm};
  const Matrix t = standardization_transform(x);
  const double mean = xm.col(1).mean();
  const double sd = std::sqrt((xm.col(1).array() - mean).square().sum() / 3.0);
  CHECK(t(0, 0) == 1.0);
  CHECK(t(1, 0) == 0.0);
  CHECK(t(0, 1) == doctest::Approx(-mean / sd));
  CHECK(t(1, 1) == doctest::Approx(1.0 / sd));
}

TEST_CASE("standardization_transform hand values for mean 3, sd 2") {
  Matrix xm(3, 2);
  xm << 1, 1, 1, 3, 1, 5;  // mean 3, sample sd 2
  const DesignMatrix x{xm};
  const Matrix t = standardization_transform(x);
  CHECK(t(0, 1) == doctest::Approx(-1.5));
  CHECK(t(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("standardized design has mean-zero unit-sd columns") {
  const Matrix xm = random_design(20, 5, 7);
  const DesignMatrix x{xm};
  const Matrix t = standardization_transform(x);
  const Matrix xs = xm * t;
  CHECK((xs.col(0).array() - 1.0).abs().maxCoeff() < 1e-12);
  for (int j = 1; j < 5; ++j) {
    CHECK(std::abs(xs.col(j).mean()) < 1e-12);
    const double sd =
        std::sqrt(xs.col(j).array().square().sum() / 19.0);
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-12));
  }
  // Already standardized: T is the identity with zero offsets.
  const Matrix t2 = standardization_transform(DesignMatrix{xs});
  CHECK((t2 - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardization_transform rejects constant columns") {
  Matrix xm = random_design(5, 3, 9);
  xm.col(2).setConstant(7.0);
  try {
    standardization_transform(DesignMatrix{xm});
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("column 2") != std::string::npos);
  }
}

TEST_CASE("ridge_path limits") {
  const Matrix xm = random_design(10, 4, 11);
  const DesignMatrix x{xm};
  const Vector y = random_vector(10, 12);
  const RidgePathFit path = ridge_path(x, y, {1e-10, 1e12}, false);
  // lambda -> 0 with full column rank: OLS.
  const Vector ols = ols_fit(x, y).fitted;
  CHECK((path.fitted.col(0) - ols).cwiseAbs().maxCoeff() < 1e-6);
  // lambda -> inf: intercept only.
  CHECK((path.fitted.col(1).array() - y.mean()).abs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge_path matches the dense centered solve") {
  const Matrix xm = random_design(10, 4, 13);
  const DesignMatrix x{xm};
  const Vector y = random_vector(10, 14);
  const double lambda = 2.0;

  const Eigen::RowVectorXd means = xm.rightCols(3).colwise().mean();
  const Matrix xc = xm.rightCols(3).rowwise() - means;
  const Vector yc = y.array() - y.mean();
  const Matrix m =
      xc.transpose() * xc + lambda * Matrix::Identity(3, 3);
  const Vector slopes = m.ldlt().solve(xc.transpose() * yc);
  Vector expected(4);
  expected(0) = y.mean() - means * slopes;
  expected.tail(3) = slopes;

  const RidgePathFit path = ridge_path(x, y, {lambda}, false);
  CHECK((path.coefficients.col(0) - expected).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((path.fitted.col(0) - xm * expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("standardized ridge keeps fitted = X * coefficients") {
  const Matrix xm = random_design(12, 5, 15);
  const DesignMatrix x{xm};
  const Vector y = random_vector(12, 16);
  const RidgePathFit path = ridge_path(x, y, default_lambda_grid(), true);
  REQUIRE(path.transform.has_value());
  for (int li = 0; li < 45; ++li) {
    CHECK((xm * path.coefficients.col(li) - path.fitted.col(li))
              .cwiseAbs()
              .maxCoeff() < 1e-8);
  }
}

TEST_CASE("ridge_coefficients_plain solves the M-penalized system") {
  const Matrix xm = random_design(9, 4, 17);
  const DesignMatrix x{xm};
  const Vector y = random_vector(9, 18);
  const double lambda = 3.0;
  Matrix m = xm.transpose() * xm;
  for (int j = 1; j < 4; ++j) m(j, j) += lambda;
  const Vector expected = m.lu().solve(xm.transpose() * y);
  CHECK((ridge_coefficients_plain(x, y, lambda) - expected)
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  // And it coincides with the centering path when the design has ones.
  const RidgePathFit path = ridge_path(x, y, {lambda}, false);
  CHECK((path.coefficients.col(0) - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge fitted values are not invariant to rotations; FVS's are") {
  RngStream rng(21, 0);
  auto inst = fvs::simhub::gen_fullrank(60, 20, 0.0, 0.1, 1.0, rng);
  auto rotated = fvs::simhub::gen_fullrank_transform(inst, rng);

  const double lambda = 1.0;
  const Vector ridge1 =
      inst.x.data() * ridge_coefficients_plain(inst.x, inst.y, lambda);
  const Vector ridge2 =
      rotated.x.data() * ridge_coefficients_plain(rotated.x, rotated.y, lambda);
  const double ridge_rel = (ridge1 - ridge2).cwiseAbs().maxCoeff() /
                           ridge1.cwiseAbs().maxCoeff();
  CHECK(ridge_rel > 1e-3);

  for (double gamma : {0.25, 0.75}) {
    const Vector f1 = fvs::shrinkage::fit_fvs(inst.x, inst.y, gamma).fitted;
    const Vector f2 =
        fvs::shrinkage::fit_fvs(rotated.x, rotated.y, gamma).fitted;
    CHECK((f1 - f2).cwiseAbs().maxCoeff() <=
          1e-7 * inst.y.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("coefficient path is continuous as the grid refines") {
  const Matrix xm = random_design(15, 6, 23);
  const DesignMatrix x{xm};
  const Vector y = random_vector(15, 24);
  double prev_gap = std::numeric_limits<double>::infinity();
  for (int density : {4, 16, 64}) {
    std::vector<double> grid;
    for (int k = 0; k <= density; ++k) {
      grid.push_back(std::pow(10.0, -2.0 + 4.0 * k / density));
    }
    const RidgePathFit path = ridge_path(x, y, grid, false);
    double max_gap = 0.0;
    for (std::size_t li = 1; li < grid.size(); ++li) {
      max_gap = std::max(
          max_gap, (path.coefficients.col(li) - path.coefficients.col(li - 1))
                       .norm());
    }
    CHECK(max_gap < prev_gap);
    prev_gap = max_gap;
  }
}

TEST_CASE("one SVD serves the whole lambda path") {
  const Matrix xm = random_design(300, 250, 25);
  const DesignMatrix x{xm};
  const Vector y = random_vector(300, 26);
  using clock = std::chrono::steady_clock;
  auto time_of = [&](const std::vector<double>& grid) {
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 7; ++rep) {
      const auto t0 = clock::now();
      const RidgePathFit path = ridge_path(x, y, grid, false);
      const auto t1 = clock::now();
      (void)path;
      best = std::min(best,
                      std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  const double single = time_of({1.0});
  const double full_path = time_of(default_lambda_grid());
  // A path implementation that redecomposed per lambda would cost ~45x a
  // single fit; the slack absorbs scheduler noise on small machines.
  CHECK(full_path < 2.0 * single + 0.05);
}

TEST_CASE("ridge_cv picks the error-minimizing lambda and is deterministic") {
  const Matrix xm = random_design(40, 5, 27);
  const DesignMatrix x{xm};
  Vector beta = random_vector(5, 28);
  const Vector y = xm * beta + 0.1 * random_vector(40, 29);
  const auto a = ridge_cv(x, y, default_lambda_grid(), 5, RngStream(3, 3), true);
  const auto b = ridge_cv(x, y, default_lambda_grid(), 5, RngStream(3, 3), true);
  CHECK(a.lambda == b.lambda);
  CHECK((a.fitted - b.fitted).norm() == 0.0);
  // Strong signal, low noise: CV should not pick an enormous penalty.
  CHECK(a.lambda < 1e2);
}

TEST_SUITE_END();
