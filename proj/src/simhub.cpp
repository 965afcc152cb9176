#include "fvs/simhub.hpp"

#include "fvs/baselines.hpp"
#include "fvs/shrinkage.hpp"
#include "fvs/tuning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fvs::simhub {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector standard_normal_vector(probability::RngStream& rng, Index n) {
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

// [1 | AR(1) Gaussian block], the design shared by several generators.
Matrix ar1_design(int n, int p, probability::RngStream& rng) {
  Matrix x(n, p);
  x.col(0).setOnes();
  if (p > 1) {
    const Matrix chol = probability::ar1_chol(p - 1, 0.5);
    x.rightCols(p - 1) = probability::sample_gaussian_rows(rng, n, chol);
  }
  return x;
}

void finish_instance(GeneratedInstance& inst, double sigma,
                     probability::RngStream& rng) {
  inst.delta2 = (inst.mu.array() - inst.mu.mean()).square().sum();
  inst.gamma_opt =
      tuning::gamma_opt(inst.delta2, sigma * sigma, inst.x.rank());
  inst.y = inst.mu + sigma * standard_normal_vector(rng, inst.x.n());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::lowdim: return "lowdim";
    case Family::categorical: return "categorical";
    case Family::fullrank_lowdim: return "fullrank_lowdim";
    case Family::highdim: return "highdim";
    case Family::fullrank_highdim: return "fullrank_highdim";
    case Family::submodel: return "submodel";
  }
  return "?";
}

Family family_from_name(const std::string& name) {
  if (name == "lowdim") return Family::lowdim;
  if (name == "categorical") return Family::categorical;
  if (name == "fullrank_lowdim") return Family::fullrank_lowdim;
  if (name == "highdim") return Family::highdim;
  if (name == "fullrank_highdim") return Family::fullrank_highdim;
  if (name == "submodel") return Family::submodel;
  throw std::invalid_argument("unknown scenario family '" + name + "'");
}

std::vector<std::string> SimulationScenario::extrapolated() const {
  std::vector<std::string> flags;
  auto flag = [&flags](const std::string& f) { flags.push_back(f); };
  const std::set<double> taus = {0,    1e-4,          1e-2,          1e-1,
                                 std::pow(10, -0.5), 1, std::pow(10, 0.5),
                                 10,   std::pow(10, 1.5), 100};
  auto tau_known = [&taus](double t) {
    for (double v : taus) {
      if (std::abs(t - v) <= 1e-12 * std::max(1.0, v)) return true;
    }
    return false;
  };
  switch (family) {
    case Family::lowdim:
      if (n != 300 || (p != 75 && p != 150 && p != 250)) flag("n/p");
      if (!tau_known(tau)) flag("tau");
      if (sigma != 1.0) flag("sigma");
      break;
    case Family::categorical:
      if (n != 100) flag("n");
      if (!tau_known(tau_c) || !tau_known(tau_f)) flag("tau_c/tau_f");
      break;
    case Family::fullrank_lowdim:
      if (n != 300 || p != 150) flag("n/p");
      if (psi != 0.0 && psi != 1.0) flag("psi");
      if (s < 0.025 || s > 0.3) flag("s");
      break;
    case Family::highdim:
      if (n != 200 || p != 300) flag("n/p");
      if (!tau_known(tau)) flag("tau");
      if (sigma != 1.0 && sigma != 2.0 && sigma != 3.0) flag("sigma");
      break;
    case Family::fullrank_highdim:
      if (n != 200 || p != 300) flag("n/p");
      if (s < 0.01 || s > 0.3) flag("s");
      if (sigma != 1.0 && sigma != 3.0) flag("sigma");
      break;
    case Family::submodel:
      if (n != 100 || p != 75) flag("n/p");
      if (p0 < 5 || p0 > 25) flag("p0");
      break;
  }
  return flags;
}

SimulationScenario SimulationScenario::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "family", "n",   "p",  "sigma", "tau",  "tau_c",        "tau_f",
      "coding", "psi", "s",  "p0",    "r1",   "r2",           "seed",
      "replications"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::invalid_argument("scenario: unknown key '" + it.key() + "'");
    }
  }
  SimulationScenario sc;
  sc.family = family_from_name(j.at("family").get<std::string>());
  sc.n = j.value("n", sc.n);
  sc.p = j.value("p", sc.p);
  sc.sigma = j.value("sigma", sc.sigma);
  sc.tau = j.value("tau", sc.tau);
  sc.tau_c = j.value("tau_c", sc.tau_c);
  sc.tau_f = j.value("tau_f", sc.tau_f);
  sc.coding = j.value("coding", sc.coding);
  sc.psi = j.value("psi", sc.psi);
  sc.s = j.value("s", sc.s);
  sc.p0 = j.value("p0", sc.p0);
  sc.r1 = j.value("r1", sc.r1);
  sc.r2 = j.value("r2", sc.r2);
  sc.seed = j.value("seed", sc.seed);
  sc.replications = j.value("replications", sc.replications);
  if (sc.n < 2) throw std::invalid_argument("scenario: n must be >= 2");
  if (sc.sigma <= 0) throw std::invalid_argument("scenario: sigma must be > 0");
  if (sc.coding != 1 && sc.coding != 2) {
    throw std::invalid_argument("scenario: coding must be 1 or 2");
  }
  return sc;
}

nlohmann::json SimulationScenario::to_json() const {
  nlohmann::json j;
  j["family"] = family_name(family);
  j["n"] = n;
  j["p"] = p;
  j["sigma"] = sigma;
  j["seed"] = seed;
  j["replications"] = replications;
  switch (family) {
    case Family::lowdim:
    case Family::highdim:
      j["tau"] = tau;
      break;
    case Family::categorical:
      j["tau_c"] = tau_c;
      j["tau_f"] = tau_f;
      j["coding"] = coding;
      break;
    case Family::fullrank_lowdim:
    case Family::fullrank_highdim:
      j["psi"] = psi;
      j["s"] = s;
      j["coding"] = coding;
      break;
    case Family::submodel:
      j["p0"] = p0;
      j["r1"] = r1;
      j["r2"] = r2;
      break;
  }
  return j;
}

GeneratedInstance gen_lowdim(int n, int p, double tau, double sigma,
                             probability::RngStream& rng) {
  GeneratedInstance inst{DesignMatrix(ar1_design(n, p, rng))};
  // beta = X^-(1_n + tau Z), so mu - P_1 mu = tau (P_X - P_1) Z.
  const Vector z = standard_normal_vector(rng, n);
  const Vector target = Vector::Ones(n) + tau * z;
  inst.beta = linalg::pseudoinverse_apply(inst.x.svd(), target);
  inst.mu = inst.x.data() * inst.beta;
  finish_instance(inst, sigma, rng);
  return inst;
}

GeneratedInstance gen_highdim(int n, int p, double tau, double sigma,
                              probability::RngStream& rng) {
  return gen_lowdim(n, p, tau, sigma, rng);
}

namespace {

struct CategoricalDraws {
  Matrix numeric;                        // n x 25
  std::vector<std::vector<int>> levels;  // 3 predictors, labels 1..5
};

// Reference-coded design for the categorical scenario.  references[k] is the
// level (1..5) absorbed into the intercept for predictor k.
Matrix categorical_design(const CategoricalDraws& draws,
                          const std::array<int, 3>& references) {
  const Index n = draws.numeric.rows();
  const int p = 1 + 25 + 3 * 4 * 2;
  Matrix x = Matrix::Zero(n, p);
  x.col(0).setOnes();
  x.block(0, 1, n, 25) = draws.numeric;
  const Vector x25 = draws.numeric.col(24);
  Index col = 26;
  for (int k = 0; k < 3; ++k) {              // main effects
    for (int level = 1; level <= 5; ++level) {
      if (level == references[k]) continue;
      for (Index i = 0; i < n; ++i) {
        x(i, col) = draws.levels[k][i] == level ? 1.0 : 0.0;
      }
      ++col;
    }
  }
  for (int k = 0; k < 3; ++k) {              // interactions with the 25th
    for (int level = 1; level <= 5; ++level) {
      if (level == references[k]) continue;
      for (Index i = 0; i < n; ++i) {
        x(i, col) = draws.levels[k][i] == level ? x25(i) : 0.0;
      }
      ++col;
    }
  }
  return x;
}

bool all_levels_observed(const std::vector<int>& labels) {
  std::array<bool, 5> seen{};
  for (int l : labels) seen[l - 1] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace

GeneratedInstance gen_categorical(int n, double tau_c, double tau_f, int coding,
                                  probability::RngStream& rng) {
  if (coding != 1 && coding != 2) {
    throw std::invalid_argument("gen_categorical: coding must be 1 or 2");
  }
  const std::vector<double> equal(5, 0.2);
  CategoricalDraws draws;
  bool ok = false;
  for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
    probability::RngStream sub = rng.child(0xCA7 + attempt);
    draws.numeric =
        probability::sample_gaussian_rows(sub, n, probability::ar1_chol(25, 0.5));
    draws.levels.clear();
    ok = true;
    for (int k = 0; k < 3; ++k) {
      draws.levels.push_back(
          probability::sample_multinomial_categories(sub, n, 5, equal));
      ok = ok && all_levels_observed(draws.levels.back());
    }
  }
  if (!ok) {
    throw std::runtime_error(
        "gen_categorical: a categorical level stayed empty after 10 attempts");
  }

  const Matrix x1 = categorical_design(draws, {1, 1, 1});
  const DesignMatrix design1{x1};

  // beta = (beta_c, beta_f) in the coding-1 basis.
  probability::RngStream beta_rng = rng.child(0xBE7A);
  Vector beta(50);
  {
    const Matrix xc = x1.leftCols(26);
    const Vector zc = standard_normal_vector(beta_rng, n);
    beta.head(26) = linalg::pseudoinverse_apply(
        linalg::reduced_svd(xc), Vector(Vector::Ones(n) + tau_c * zc));

    Matrix xf = probability::sample_gaussian_rows(
        beta_rng, n, probability::ar1_chol(24, 0.5));
    const Vector zf = standard_normal_vector(beta_rng, n);
    Vector beta_f =
        tau_f * linalg::pseudoinverse_apply(linalg::reduced_svd(xf), zf);
    const double w[12] = {1, 2, 0, 0, 0, 2, 1, 0, 0, 0, 2, 1};
    for (int i = 0; i < 24; ++i) beta_f(i) *= w[i % 12];
    beta.tail(24) = beta_f;
  }

  const Vector mu = x1 * beta;

  if (coding == 1) {
    GeneratedInstance inst{design1};
    inst.beta = beta;
    inst.mu = mu;
    finish_instance(inst, 1.0, rng);
    return inst;
  }

  // Coding-2 re-references levels (2, 3, 5); identical mu and y, different
  // basis.  The coefficient vector is the min-norm representative of mu.
  const Matrix x2 = categorical_design(draws, {2, 3, 5});
  GeneratedInstance inst{DesignMatrix(x2)};
  inst.beta = linalg::pseudoinverse_apply(inst.x.svd(), mu);
  inst.mu = mu;
  finish_instance(inst, 1.0, rng);
  return inst;
}

GeneratedInstance gen_fullrank(int n, int p, double psi, double s, double sigma,
                               probability::RngStream& rng) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw std::invalid_argument("gen_fullrank: s must lie in [0, 1]");
  }
  GeneratedInstance inst{DesignMatrix(ar1_design(n, p, rng))};
  const double lo = std::pow(2.0, -psi - 1.0);
  const double hi = std::pow(2.0, -psi);
  Vector beta(p);
  for (int j = 0; j < p; ++j) beta(j) = rng.uniform(lo, hi);
  for (int j = 1; j < p; ++j) {
    if (rng.uniform() >= s) beta(j) = 0.0;  // v_j ~ Ber(s) mask
  }
  inst.beta = beta;
  inst.mu = inst.x.data() * beta;
  finish_instance(inst, sigma, rng);
  return inst;
}

GeneratedInstance gen_fullrank_transform(const GeneratedInstance& base,
                                         probability::RngStream& rng) {
  const Index p = base.x.p();
  Matrix g(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) g(i, j) = rng.normal();
  }
  const Matrix t = linalg::gram_schmidt(g);
  GeneratedInstance inst{
      DesignMatrix(base.x.data() * t, linalg::InterceptPolicy::spanning)};
  inst.beta = t.transpose() * base.beta;  // T orthogonal, so T^-1 = T'
  inst.mu = base.mu;
  inst.y = base.y;
  inst.delta2 = base.delta2;
  inst.gamma_opt = base.gamma_opt;
  return inst;
}

GeneratedInstance gen_submodel_sim(int n, int p, int p0, double r1, double r2,
                                   probability::RngStream& rng) {
  if (p0 < 1 || p0 >= p) {
    throw std::invalid_argument("gen_submodel_sim: need 1 <= p0 < p");
  }
  if (!(r2 > r1 && r1 > 0.0)) {
    throw std::invalid_argument("gen_submodel_sim: need R2 > R1 > 0");
  }
  const Matrix base = ar1_design(n, p, rng);
  const Matrix x0 = base.leftCols(p0);
  const linalg::SvdFactors svd0 = linalg::reduced_svd(x0);

  // X1 is orthogonalized against the submodel: X1* = (I - P_X0) X1.
  Matrix x1 = base.rightCols(p - p0);
  for (Index j = 0; j < x1.cols(); ++j) {
    x1.col(j) -= linalg::projector_apply(svd0, x1.col(j));
  }
  Matrix xall(n, p);
  xall.leftCols(p0) = x0;
  xall.rightCols(p - p0) = x1;

  GeneratedInstance inst{DesignMatrix(xall)};
  const Index r = inst.x.rank();
  const Index r0 = svd0.rank();
  if (r - r0 < 1) {
    throw std::invalid_argument("gen_submodel_sim: rank(X) == rank(X0)");
  }

  const double target_sub = r1 * static_cast<double>(r - r0);
  const double target_coarse = r2 * static_cast<double>(r - 1);
  if (target_coarse < target_sub) {
    throw std::invalid_argument(
        "gen_submodel_sim: infeasible targets, R2 (rank-1) < R1 (rank-rank0)");
  }

  const Vector z = standard_normal_vector(rng, n);
  const Vector zp = standard_normal_vector(rng, n);
  const linalg::SvdFactors svd1 = linalg::reduced_svd(x1);

  // tau_1^2 ||P_X1* Z'||^2 = R1 (r - r0);
  // tau_0^2 ||(P_X0 - P_1) Z||^2 = R2 (r - 1) - R1 (r - r0).
  const double s1 = linalg::projector_apply(svd1, zp).squaredNorm();
  const Vector p0z = linalg::projector_apply(svd0, z);
  const double s0 = (p0z.array() - z.mean()).square().sum();
  const double tau1 = std::sqrt(target_sub / s1);
  const double tau0 = std::sqrt((target_coarse - target_sub) / s0);

  Vector beta = Vector::Zero(p);
  beta.head(p0) = linalg::pseudoinverse_apply(
      svd0, Vector(Vector::Ones(n) + tau0 * z));
  beta.tail(p - p0) = tau1 * linalg::pseudoinverse_apply(svd1, zp);
  inst.beta = beta;
  inst.mu = xall * beta;
  finish_instance(inst, 1.0, rng);

  inst.submodel_cols.resize(p0);
  for (int j = 0; j < p0; ++j) inst.submodel_cols[j] = j;
  inst.delta2_submodel =
      (inst.mu - linalg::projector_apply(svd0, inst.mu)).squaredNorm();
  inst.gamma_opt_submodel = inst.delta2_submodel /
                            (static_cast<double>(r - r0) +
                             inst.delta2_submodel);
  return inst;
}

GeneratedInstance generate(const SimulationScenario& sc,
                           probability::RngStream& rng) {
  switch (sc.family) {
    case Family::lowdim:
      return gen_lowdim(sc.n, sc.p, sc.tau, sc.sigma, rng);
    case Family::highdim:
      return gen_highdim(sc.n, sc.p, sc.tau, sc.sigma, rng);
    case Family::categorical:
      return gen_categorical(sc.n, sc.tau_c, sc.tau_f, sc.coding, rng);
    case Family::fullrank_lowdim:
    case Family::fullrank_highdim: {
      GeneratedInstance base =
          gen_fullrank(sc.n, sc.p, sc.psi, sc.s, sc.sigma, rng);
      if (sc.coding == 2) return gen_fullrank_transform(base, rng);
      return base;
    }
    case Family::submodel:
      return gen_submodel_sim(sc.n, sc.p, sc.p0, sc.r1, sc.r2, rng);
  }
  throw std::logic_error("generate: unhandled family");
}

double same_x_loss(const Vector& fitted, const Vector& mu) {
  if (fitted.size() != mu.size()) {
    throw std::invalid_argument("same_x_loss: length mismatch");
  }
  return (fitted - mu).squaredNorm() / static_cast<double>(mu.size());
}

namespace {

Vector fvs_fitted_at(const GeneratedInstance& inst, double gamma) {
  return shrinkage::fit_fvs(inst.x, inst.y, gamma).fitted;
}

}  // namespace

NamedEstimator make_estimator(const std::string& name) {
  using probability::RngStream;
  if (name == "ols") {
    return {name, [](const GeneratedInstance& g, RngStream) {
              return baselines::ols_fit(g.x, g.y).fitted;
            }};
  }
  if (name == "oracle") {
    return {name, [](const GeneratedInstance& g, RngStream) {
              return fvs_fitted_at(g, g.gamma_opt);
            }};
  }
  if (name == "es") {
    return {name, [](const GeneratedInstance& g, RngStream) {
              return fvs_fitted_at(
                  g, tuning::gamma_hat(tuning::f_statistic(g.x, g.y)));
            }};
  }
  if (name == "es90" || name == "es95") {
    const auto level = name == "es90" ? tuning::ThresholdLevel::q90
                                      : tuning::ThresholdLevel::q95;
    return {name, [level](const GeneratedInstance& g, RngStream) {
              const int d1 = static_cast<int>(g.x.rank() - 1);
              const int d2 = static_cast<int>(g.x.n() - g.x.rank());
              const double f = tuning::f_statistic(g.x, g.y);
              return fvs_fitted_at(
                  g, tuning::gamma_hat_thresholded(f, level, d1, d2));
            }};
  }
  if (name == "cv") {
    return {name, [](const GeneratedInstance& g, RngStream rng) {
              const auto sel = tuning::cv_gamma(
                  g.x, g.y, 10, tuning::default_gamma_grid(), rng);
              return fvs_fitted_at(g, sel.gamma);
            }};
  }
  if (name == "ridge") {
    return {name, [](const GeneratedInstance& g, RngStream rng) {
              return baselines::ridge_cv(g.x, g.y,
                                         baselines::default_lambda_grid(), 10,
                                         rng, true)
                  .fitted;
            }};
  }
  if (name == "rep1" || name == "rep2" || name == "rep3" || name == "rep4") {
    const double t = name == "rep1" ? 1.0 : name == "rep2" ? 1.5
                                     : name == "rep3"      ? 2.0
                                                           : 3.0;
    const bool corrected = name == "rep2";
    return {name, [t, corrected](const GeneratedInstance& g, RngStream) {
              const double alpha = tuning::alpha_schedule(t, g.y, g.x.n());
              const auto sel = tuning::gamma_bar(g.x, g.y, alpha, corrected);
              return fvs_fitted_at(g, sel.gamma);
            }};
  }
  if (name == "oracle-sub") {
    return {name, [](const GeneratedInstance& g, RngStream) {
              if (g.submodel_cols.empty()) {
                throw std::runtime_error(
                    "oracle-sub: scenario has no submodel");
              }
              return shrinkage::fit_fvs_submodel(g.x, g.submodel_cols, g.y,
                                                 g.gamma_opt_submodel)
                  .fitted;
            }};
  }
  if (name == "es-sub" || name == "es-sub95") {
    const std::optional<tuning::ThresholdLevel> level =
        name == "es-sub95"
            ? std::optional<tuning::ThresholdLevel>(tuning::ThresholdLevel::q95)
            : std::nullopt;
    return {name, [level](const GeneratedInstance& g, RngStream) {
              if (g.submodel_cols.empty()) {
                throw std::runtime_error("es-sub: scenario has no submodel");
              }
              const auto sel = tuning::gamma_tilde_submodel(
                  g.x, g.submodel_cols, g.y, level);
              return shrinkage::fit_fvs_submodel(g.x, g.submodel_cols, g.y,
                                                 sel.gamma)
                  .fitted;
            }};
  }
  if (name.rfind("fixed:", 0) == 0) {
    const double gamma = std::stod(name.substr(6));
    return {name, [gamma](const GeneratedInstance& g, RngStream) {
              return fvs_fitted_at(g, gamma);
            }};
  }
  throw std::invalid_argument("unknown estimator '" + name + "'");
}

std::vector<NamedEstimator> make_estimators(
    const std::vector<std::string>& names) {
  if (names.empty()) {
    throw std::invalid_argument("estimator set must not be empty");
  }
  std::vector<NamedEstimator> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(make_estimator(n));
  return out;
}

int ReplicationReport::estimator_index(const std::string& name) const {
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    if (estimators[i] == name) return static_cast<int>(i);
  }
  throw std::invalid_argument("report has no estimator '" + name + "'");
}

std::string ReplicationReport::to_csv() const {
  std::ostringstream os;
  os << "estimator,mean,se,n_missing,replications\n";
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    os << estimators[e] << ',' << format_double(mean[e]) << ','
       << format_double(se[e]) << ',' << n_missing[e] << ','
       << scenario.replications << '\n';
  }
  return os.str();
}

std::string ReplicationReport::per_replication_csv() const {
  std::ostringstream os;
  os << "replication";
  for (const auto& e : estimators) os << ',' << e;
  os << '\n';
  for (Index r = 0; r < losses.rows(); ++r) {
    os << r;
    for (Index e = 0; e < losses.cols(); ++e) {
      os << ',' << format_double(losses(r, e));
    }
    os << '\n';
  }
  return os.str();
}

ReplicationReport run_replications(const SimulationScenario& sc,
                                   const std::vector<NamedEstimator>& estimators,
                                   std::uint64_t rng_seed, int workers) {
  if (sc.replications < 1) {
    throw std::invalid_argument("run_replications: replications must be >= 1");
  }
  if (estimators.empty()) {
    throw std::invalid_argument("run_replications: empty estimator set");
  }
  const int reps = sc.replications;
  const int ne = static_cast<int>(estimators.size());

  ReplicationReport report;
  report.scenario = sc;
  for (const auto& e : estimators) report.estimators.push_back(e.name);
  report.losses = Matrix::Constant(reps, ne, kNaN);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_range = [&](int lo, int hi) {
    try {
      for (int r = lo; r < hi; ++r) {
        probability::RngStream stream(rng_seed, static_cast<std::uint64_t>(r));
        const GeneratedInstance inst = generate(sc, stream);
        for (int e = 0; e < ne; ++e) {
          try {
            const Vector fitted = estimators[e].fn(
                inst, stream.child(0xE5700 + static_cast<std::uint64_t>(e)));
            report.losses(r, e) = same_x_loss(fitted, inst.mu);
          } catch (const std::exception&) {
            // Missing cell; the report records the count.
          }
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  workers = std::max(1, std::min(workers, reps));
  if (workers == 1) {
    run_range(0, reps);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (reps + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(reps, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  report.mean.assign(ne, kNaN);
  report.se.assign(ne, kNaN);
  report.n_missing.assign(ne, 0);
  for (int e = 0; e < ne; ++e) {
    double sum = 0.0;
    int count = 0;
    for (int r = 0; r < reps; ++r) {
      const double v = report.losses(r, e);
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    report.n_missing[e] = reps - count;
    if (count == 0) continue;
    const double m = sum / count;
    report.mean[e] = m;
    if (count >= 2) {
      double ss = 0.0;
      for (int r = 0; r < reps; ++r) {
        const double v = report.losses(r, e);
        if (!std::isnan(v)) ss += (v - m) * (v - m);
      }
      report.se[e] = std::sqrt(ss / (count - 1)) / std::sqrt(count);
    }
  }
  return report;
}

std::string RiskCurve::to_csv() const {
  std::ostringstream os;
  os << "lambda,fvs_mean,fvs_se,ridge_mean,ridge_se\n";
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    os << format_double(lambdas[i]) << ',' << format_double(fvs_mean[i]) << ','
       << format_double(fvs_se[i]) << ',' << format_double(ridge_mean[i])
       << ',' << format_double(ridge_se[i]) << '\n';
  }
  return os.str();
}

RiskCurve risk_curve(const SimulationScenario& sc,
                     const std::vector<double>& lambda_grid, int workers) {
  for (double l : lambda_grid) {
    if (!(l > 0.0)) {
      throw std::invalid_argument("risk_curve: lambda grid must be positive");
    }
  }
  const int reps = sc.replications;
  const int nl = static_cast<int>(lambda_grid.size());
  Matrix fvs_losses(reps, nl);
  Matrix ridge_losses(reps, nl);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run_range = [&](int lo, int hi) {
    try {
      for (int r = lo; r < hi; ++r) {
        probability::RngStream stream(sc.seed, static_cast<std::uint64_t>(r));
        const GeneratedInstance inst = generate(sc, stream);
        const Vector proj = linalg::projector_apply(inst.x.svd(), inst.y);
        const Vector bar = Vector::Constant(inst.x.n(), inst.y.mean());
        const baselines::RidgePathFit path =
            baselines::ridge_path(inst.x, inst.y, lambda_grid, true);
        for (int li = 0; li < nl; ++li) {
          const double gamma = 1.0 / (1.0 + lambda_grid[li]);
          fvs_losses(r, li) =
              same_x_loss(gamma * proj + (1.0 - gamma) * bar, inst.mu);
          ridge_losses(r, li) = same_x_loss(path.fitted.col(li), inst.mu);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  workers = std::max(1, std::min(workers, reps));
  if (workers == 1) {
    run_range(0, reps);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (reps + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int lo = w * chunk;
      const int hi = std::min(reps, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  RiskCurve curve;
  curve.lambdas = lambda_grid;
  curve.fvs_mean.resize(nl);
  curve.fvs_se.resize(nl);
  curve.ridge_mean.resize(nl);
  curve.ridge_se.resize(nl);
  auto summarize = [reps](const Matrix& losses, int li, double* mean,
                          double* se) {
    const double m = losses.col(li).mean();
    *mean = m;
    if (reps >= 2) {
      const double ss = (losses.col(li).array() - m).square().sum();
      *se = std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
    } else {
      *se = kNaN;
    }
  };
  for (int li = 0; li < nl; ++li) {
    summarize(fvs_losses, li, &curve.fvs_mean[li], &curve.fvs_se[li]);
    summarize(ridge_losses, li, &curve.ridge_mean[li], &curve.ridge_se[li]);
  }
  return curve;
}

PairedInterval paired_interval(const ReplicationReport& report,
                               const std::string& estimator_a,
                               const std::string& estimator_b) {
  const int a = report.estimator_index(estimator_a);
  const int b = report.estimator_index(estimator_b);
  std::vector<double> diffs;
  for (Index r = 0; r < report.losses.rows(); ++r) {
    const double da = report.losses(r, a);
    const double db = report.losses(r, b);
    if (!std::isnan(da) && !std::isnan(db)) diffs.push_back(da - db);
  }
  const int m = static_cast<int>(diffs.size());
  if (m < 2) {
    throw std::invalid_argument(
        "paired_interval: need at least 2 paired replications");
  }
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= m;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / (m - 1));
  const double tq = probability::student_t_quantile(0.975, m - 1);
  const double half = tq * sd / std::sqrt(static_cast<double>(m));
  PairedInterval out;
  out.mean_diff = mean;
  out.lo = mean - half;
  out.hi = mean + half;
  out.degenerate = sd <= 1e-15 * std::max(1.0, std::abs(mean));
  return out;
}

}  // namespace fvs::simhub
