// Command-line surface for the fitted-value shrinkage toolkit: fit models on
// CSV data, select tuning parameters, run simulation scenarios, and check
// invariance under design transformations.  Data goes to stdout / --out
// files; diagnostics go to stderr.

#include "fvs/baselines.hpp"
#include "fvs/dataset.hpp"
#include "fvs/linalg.hpp"
#include "fvs/probability.hpp"
#include "fvs/shrinkage.hpp"
#include "fvs/simhub.hpp"
#include "fvs/tuning.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using fvs::linalg::DesignMatrix;
using fvs::linalg::Matrix;
using fvs::linalg::Vector;
using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t env_seed_fallback() {
  if (const char* env = std::getenv("FVS_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

struct DatasetFlags {
  std::string csv_path;
  std::string response;
  std::vector<std::string> categorical;  // NAME=REF
  std::vector<std::string> interactions; // A:B
};

void add_dataset_flags(CLI::App* cmd, DatasetFlags* flags) {
  cmd->add_option("--csv", flags->csv_path, "input CSV file")->required();
  cmd->add_option("--response", flags->response, "response column name")
      ->required();
  cmd->add_option("--categorical", flags->categorical,
                  "categorical column as NAME=REF (reference level)");
  cmd->add_option("--interaction", flags->interactions,
                  "interaction of two columns as A:B");
}

fvs::dataset::DatasetSpec to_spec(const DatasetFlags& flags) {
  fvs::dataset::DatasetSpec spec;
  spec.csv_path = flags.csv_path;
  spec.response = flags.response;
  for (const auto& c : flags.categorical) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--categorical expects NAME=REF, got '" + c +
                                  "'");
    }
    spec.categorical[c.substr(0, eq)] = c.substr(eq + 1);
  }
  for (const auto& i : flags.interactions) {
    const auto colon = i.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("--interaction expects A:B, got '" + i + "'");
    }
    spec.interactions.emplace_back(i.substr(0, colon), i.substr(colon + 1));
  }
  return spec;
}

fvs::tuning::TuningResult run_selector(const DesignMatrix& x, const Vector& y,
                                       const std::string& method,
                                       double alpha_t, int folds,
                                       std::uint64_t seed) {
  namespace tn = fvs::tuning;
  const bool lowdim = x.n() > x.rank();
  if (method == "f-ratio" || method == "f-ratio-q90" ||
      method == "f-ratio-q95") {
    if (!lowdim) {
      throw std::runtime_error(
          "method '" + method +
          "' needs n > rank(X); with rank(X) = n the error variance is not "
          "estimable -- use --method bar or bar-corrected");
    }
    const double f = tn::f_statistic(x, y);
    tn::TuningResult out;
    out.f_stat = f;
    out.sigma2_estimate = tn::sigma_hat2(x, y);
    if (method == "f-ratio") {
      out.method = tn::Method::f_ratio;
      out.gamma = tn::gamma_hat(f);
    } else {
      const auto level = method == "f-ratio-q90" ? tn::ThresholdLevel::q90
                                                 : tn::ThresholdLevel::q95;
      out.method = method == "f-ratio-q90" ? tn::Method::f_ratio_q90
                                           : tn::Method::f_ratio_q95;
      out.gamma = tn::gamma_hat_thresholded(
          f, level, static_cast<int>(x.rank() - 1),
          static_cast<int>(x.n() - x.rank()));
    }
    return out;
  }
  if (method == "cv") {
    return tn::cv_gamma(x, y, folds, tn::default_gamma_grid(),
                        fvs::probability::RngStream(seed, 0));
  }
  if (method == "bar" || method == "bar-corrected") {
    const double alpha = tn::alpha_schedule(alpha_t, y, x.n());
    return tn::gamma_bar(x, y, alpha, method == "bar-corrected");
  }
  throw std::invalid_argument("unknown tuning method '" + method + "'");
}

json tuning_to_json(const fvs::tuning::TuningResult& t) {
  json j;
  j["gamma"] = t.gamma;
  j["method"] = fvs::tuning::method_name(t.method);
  if (t.f_stat) j["f_stat"] = *t.f_stat;
  if (t.sigma2_estimate) j["sigma2_estimate"] = *t.sigma2_estimate;
  if (t.alpha) j["alpha"] = *t.alpha;
  if (t.clamped) j["clamped"] = true;
  return j;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

// ---------------------------------------------------------------- fit ----

int cmd_fit(const DatasetFlags& flags, const std::string& gamma_arg,
            const std::string& method, double alpha_t, int folds,
            std::uint64_t seed, const std::string& out_dir, bool recode) {
  const auto spec = to_spec(flags);
  const auto csv = fvs::dataset::read_csv(spec.csv_path);
  const auto built = recode ? fvs::dataset::recode_design(csv, spec)
                            : fvs::dataset::build_design(csv, spec);
  const DesignMatrix x(built.x);
  if (x.rank() < 2) {
    throw std::runtime_error("design has rank < 2; nothing to shrink");
  }

  json summary;
  double gamma = 1.0;
  if (gamma_arg == "auto") {
    std::string m = method;
    if (m == "auto") {
      m = x.n() > x.rank() ? "f-ratio" : "bar-corrected";
    }
    const auto sel = run_selector(x, built.y, m, alpha_t, folds, seed);
    gamma = sel.gamma;
    summary["tuning"] = tuning_to_json(sel);
  } else {
    gamma = std::stod(gamma_arg);
  }

  const auto fit = fvs::shrinkage::fit_fvs(x, built.y, gamma);

  std::ostringstream coef;
  coef << "column,name,coefficient\n";
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    coef << j << ',' << built.column_names[j] << ','
         << fmt17(fit.coefficients(j)) << '\n';
  }
  std::ostringstream fitted;
  fitted << "row,fitted\n";
  for (Eigen::Index i = 0; i < fit.fitted.size(); ++i) {
    fitted << i << ',' << fmt17(fit.fitted(i)) << '\n';
  }
  std::filesystem::create_directories(out_dir);
  const std::string coef_path = out_dir + "/coefficients.csv";
  const std::string fitted_path = out_dir + "/fitted.csv";
  write_file(coef_path, coef.str());
  write_file(fitted_path, fitted.str());

  summary["gamma"] = fit.gamma;
  summary["n"] = x.n();
  summary["p"] = x.p();
  summary["rank"] = x.rank();
  if (fit.sigma_hat2) summary["sigma_hat2"] = *fit.sigma_hat2;
  summary["coefficients_csv"] = coef_path;
  summary["fitted_csv"] = fitted_path;
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

// --------------------------------------------------------------- tune ----

int cmd_tune(const DatasetFlags& flags, const std::string& method,
             double alpha_t, int folds, std::uint64_t seed) {
  const auto spec = to_spec(flags);
  const auto csv = fvs::dataset::read_csv(spec.csv_path);
  const auto built = fvs::dataset::build_design(csv, spec);
  const DesignMatrix x(built.x);
  const auto sel = run_selector(x, built.y, method, alpha_t, folds, seed);
  std::cout << tuning_to_json(sel).dump(2) << std::endl;
  return 0;
}

// ----------------------------------------------------------- simulate ----

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 int workers, bool per_replication, bool risk_curve) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open '" + config_path + "'");
  json config;
  try {
    config = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config '" + config_path + "': " + e.what());
  }

  std::vector<std::string> estimator_names;
  if (!config.contains("estimators")) {
    throw std::runtime_error("config: missing 'estimators' list");
  }
  for (const auto& e : config["estimators"]) {
    estimator_names.push_back(e.get<std::string>());
  }
  config.erase("estimators");
  const auto scenario = fvs::simhub::SimulationScenario::from_json(config);
  if (scenario.replications < 1) {
    throw std::runtime_error("config: replications must be >= 1");
  }
  for (const auto& f : scenario.extrapolated()) {
    std::cerr << "warning: scenario parameter outside the documented range: "
              << f << " (extrapolated)\n";
  }

  const auto estimators = fvs::simhub::make_estimators(estimator_names);
  const auto report = fvs::simhub::run_replications(scenario, estimators,
                                                    scenario.seed, workers);

  std::filesystem::create_directories(out_dir);
  write_file(out_dir + "/report.csv", report.to_csv());
  if (per_replication) {
    write_file(out_dir + "/replications.csv", report.per_replication_csv());
  }
  if (risk_curve) {
    // Loss-vs-lambda curves on the grid {10^(-7+0.01k)}.
    std::vector<double> grid;
    for (int k = 0; k <= 1150; ++k) grid.push_back(std::pow(10.0, -7.0 + 0.01 * k));
    const auto curve = fvs::simhub::risk_curve(scenario, grid, workers);
    write_file(out_dir + "/risk_curve.csv", curve.to_csv());
  }
  std::cout << report.to_csv();

  for (int m : report.n_missing) {
    if (m > 0) {
      std::cerr << "warning: some estimator cells are missing\n";
      return 2;
    }
  }
  return 0;
}

// ----------------------------------------------------- invariance check ----

struct InvariancePair {
  DesignMatrix x1;
  DesignMatrix x2;
  Vector y;
};

InvariancePair scenario_pair(const std::string& config_path,
                             const std::string& transform,
                             std::uint64_t seed) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open '" + config_path + "'");
  json config = json::parse(in);
  config.erase("estimators");
  auto scenario = fvs::simhub::SimulationScenario::from_json(config);
  fvs::probability::RngStream rng(seed, 0);

  namespace sh = fvs::simhub;
  if (transform == "recoding") {
    if (scenario.family != sh::Family::categorical) {
      throw std::runtime_error(
          "recoding transform applies to the categorical scenario family");
    }
    scenario.coding = 1;
    fvs::probability::RngStream rng2 = rng;
    auto base = sh::generate(scenario, rng);
    scenario.coding = 2;
    auto recoded = sh::generate(scenario, rng2);
    return {base.x, recoded.x, base.y};
  }
  auto base = sh::generate(scenario, rng);
  if (transform == "identity") {
    return {base.x, base.x, base.y};
  }
  if (transform == "gram-schmidt-rotation") {
    auto rotated = sh::gen_fullrank_transform(base, rng);
    return {base.x, rotated.x, base.y};
  }
  throw std::invalid_argument("unknown transform '" + transform + "'");
}

InvariancePair dataset_pair(const DatasetFlags& flags,
                            const std::string& transform,
                            std::uint64_t seed) {
  const auto spec = to_spec(flags);
  const auto csv = fvs::dataset::read_csv(spec.csv_path);
  const auto built = fvs::dataset::build_design(csv, spec);
  const DesignMatrix x1(built.x);
  if (transform == "identity") {
    return {x1, x1, built.y};
  }
  if (transform == "recoding") {
    if (spec.categorical.empty()) {
      throw std::runtime_error("recoding needs --categorical columns");
    }
    const auto recoded = fvs::dataset::recode_design(csv, spec);
    return {x1, DesignMatrix(recoded.x), built.y};
  }
  if (transform == "gram-schmidt-rotation") {
    fvs::probability::RngStream rng(seed, 0);
    Matrix g(x1.p(), x1.p());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
    }
    const Matrix t = fvs::linalg::gram_schmidt(g);
    return {x1,
            DesignMatrix(built.x * t, fvs::linalg::InterceptPolicy::spanning),
            built.y};
  }
  throw std::invalid_argument("unknown transform '" + transform + "'");
}

int cmd_invariance_check(const InvariancePair& pair, double ridge_lambda) {
  const Vector& y = pair.y;
  const double scale = y.cwiseAbs().maxCoeff();

  double fvs_disc = 0.0;
  for (double gamma : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto f1 = fvs::shrinkage::fit_fvs(pair.x1, y, gamma).fitted;
    const auto f2 = fvs::shrinkage::fit_fvs(pair.x2, y, gamma).fitted;
    fvs_disc = std::max(fvs_disc, (f1 - f2).cwiseAbs().maxCoeff());
  }

  const Vector r1 = pair.x1.data() * fvs::baselines::ridge_coefficients_plain(
                                         pair.x1, y, ridge_lambda);
  const Vector r2 = pair.x2.data() * fvs::baselines::ridge_coefficients_plain(
                                         pair.x2, y, ridge_lambda);
  const double ridge_disc = (r1 - r2).cwiseAbs().maxCoeff();

  json out;
  out["fvs_max_discrepancy"] = fvs_disc;
  out["ridge_max_discrepancy"] = ridge_disc;
  out["scale"] = scale;
  out["fvs_relative"] = fvs_disc / scale;
  out["ridge_relative"] = ridge_disc / scale;
  out["ridge_lambda"] = ridge_lambda;
  std::cout << out.dump(2) << std::endl;
  return fvs_disc <= 1e-7 * scale ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fitted-value shrinkage toolkit"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "fit the shrinkage estimator on CSV data");
  DatasetFlags fit_flags;
  add_dataset_flags(fit, &fit_flags);
  std::string fit_gamma = "auto";
  std::string fit_method = "auto";
  double fit_alpha_t = 1.5;
  int fit_folds = 10;
  std::uint64_t fit_seed = env_seed_fallback();
  std::string fit_out = ".";
  bool fit_recode = false;
  fit->add_option("--gamma", fit_gamma, "shrinkage weight in [0,1], or 'auto'");
  fit->add_option("--method", fit_method,
                  "selector for --gamma auto: f-ratio|f-ratio-q90|f-ratio-q95|"
                  "cv|bar|bar-corrected|auto");
  fit->add_option("--alpha-t", fit_alpha_t, "exponent t in alpha = n^t/(2||y-P1y||^2)");
  fit->add_option("--folds", fit_folds, "cross-validation folds");
  fit->add_option("--seed", fit_seed, "rng seed (default: FVS_SEED env or 0)");
  fit->add_option("--out", fit_out, "output directory");
  fit->add_flag("--recode", fit_recode,
                "rotate categorical reference levels (invariance demo)");

  // tune
  auto* tune = app.add_subcommand("tune", "select the tuning parameter only");
  DatasetFlags tune_flags;
  add_dataset_flags(tune, &tune_flags);
  std::string tune_method = "f-ratio";
  double tune_alpha_t = 1.5;
  int tune_folds = 10;
  std::uint64_t tune_seed = env_seed_fallback();
  tune->add_option("--method", tune_method,
                   "f-ratio|f-ratio-q90|f-ratio-q95|cv|bar|bar-corrected")
      ->required();
  tune->add_option("--alpha-t", tune_alpha_t, "exponent t for bar methods");
  tune->add_option("--folds", tune_folds, "cross-validation folds");
  tune->add_option("--seed", tune_seed, "rng seed (default: FVS_SEED env or 0)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a simulation scenario");
  std::string sim_config;
  std::string sim_out = ".";
  int sim_workers = 1;
  bool sim_per_rep = false;
  bool sim_risk_curve = false;
  sim->add_option("--config", sim_config, "scenario JSON file")->required();
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--workers", sim_workers, "parallel replication workers");
  sim->add_flag("--per-replication", sim_per_rep,
                "also write per-replication losses");
  sim->add_flag("--risk-curve", sim_risk_curve,
                "also write loss-vs-lambda curves for shrinkage and ridge");

  // invariance-check
  auto* inv = app.add_subcommand("invariance-check",
                                 "compare fits before/after a design transform");
  std::string inv_config;
  DatasetFlags inv_flags;
  std::string inv_transform = "gram-schmidt-rotation";
  std::uint64_t inv_seed = env_seed_fallback();
  double inv_lambda = 1.0;
  inv->add_option("--config", inv_config, "scenario JSON file");
  inv->add_option("--csv", inv_flags.csv_path, "input CSV file");
  inv->add_option("--response", inv_flags.response, "response column name");
  inv->add_option("--categorical", inv_flags.categorical, "NAME=REF");
  inv->add_option("--interaction", inv_flags.interactions, "A:B");
  inv->add_option("--transform", inv_transform,
                  "identity|recoding|gram-schmidt-rotation");
  inv->add_option("--seed", inv_seed, "rng seed");
  inv->add_option("--ridge-lambda", inv_lambda, "ridge penalty for the contrast");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      return cmd_fit(fit_flags, fit_gamma, fit_method, fit_alpha_t, fit_folds,
                     fit_seed, fit_out, fit_recode);
    }
    if (*tune) {
      return cmd_tune(tune_flags, tune_method, tune_alpha_t, tune_folds,
                      tune_seed);
    }
    if (*sim) {
      return cmd_simulate(sim_config, sim_out, sim_workers, sim_per_rep,
                          sim_risk_curve);
    }
    if (*inv) {
      if (!inv_config.empty()) {
        return cmd_invariance_check(
            scenario_pair(inv_config, inv_transform, inv_seed), inv_lambda);
      }
      if (inv_flags.csv_path.empty() || inv_flags.response.empty()) {
        throw std::runtime_error(
            "invariance-check needs --config or --csv/--response");
      }
      return cmd_invariance_check(
          dataset_pair(inv_flags, inv_transform, inv_seed), inv_lambda);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
