#pragma once

// Subcommand implementations behind the command-line front end. Each command
// writes its primary output to `out`, diagnostics to `err`, and returns the
// process exit code:
//   0  success (verify: every check passed)
//   1  invalid input (model file, flags, tensor budget)
//   2  non-convergence of a numerical step
//   3  verify: at least one check failed

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinglass/criticality.hpp"
#include "spinglass/landscape.hpp"
#include "spinglass/model.hpp"
#include "spinglass/montecarlo.hpp"
#include "spinglass/second_moment.hpp"

namespace spinglass::cli {

struct RunConfig {
  std::string subcommand;
  std::string model_path;
  std::uint64_t seed = 7;
  int N = 24;
  long samples = 20'000;
  std::optional<double> beta;
  std::optional<double> beta_min, beta_max, beta_step;
  std::string out_path;
  std::string csv_path;
  Tolerances tolerances;
  double epsilon = 0.1;        // level-set half width
  double r_max = 0.5;          // band probe grid
  double r_step = 0.1;
  int disorder_samples = 2000; // empirical covariance check
  unsigned workers = 1;
  bool mutate_prefactor = false;
  bool verbose = false;
};

inline constexpr const char* kScanHeader = "beta,max_f,argmax,lambda_max_M,max_f_tilde";
inline constexpr const char* kEstimatorHeader = "beta,N,estimate,stderr,prediction,residual";

namespace detail {

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string provenance_line(const ModelSpec& model) {
  return std::string("# tool_version=") + kToolVersion + " model_hash=" + model_hash(model);
}

inline bool write_file(const std::string& path, const std::string& text, std::ostream& err) {
  if (path.empty()) return true;
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    err << "error: cannot write '" << path << "'\n";
    return false;
  }
  f << text;
  return static_cast<bool>(f);
}

inline std::optional<ModelSpec> load(const RunConfig& cfg, std::ostream& err) {
  if (cfg.model_path.empty()) {
    err << "error: --model is required\n";
    return std::nullopt;
  }
  try {
    return load_model(cfg.model_path);
  } catch (const ModelFormatError& e) {
    err << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

inline bool check_tolerances(const RunConfig& cfg, std::ostream& err) {
  if (!(cfg.tolerances.tol_sing > 0.0) || !(cfg.tolerances.tol_zero > 0.0)) {
    err << "error: tolerances must be positive\n";
    return false;
  }
  return true;
}

}  // namespace detail

/// Threshold report for one model as JSON.
inline int cmd_critical(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::check_tolerances(cfg, err)) return 1;
  auto model = detail::load(cfg, err);
  if (!model) return 1;
  CritReport rep;
  try {
    rep = verdict(*model, cfg.tolerances);
  } catch (const std::exception& e) {
    err << "error: threshold computation failed: " << e.what() << "\n";
    return 2;
  }
  const std::string text = to_json(rep, *model).dump(2) + "\n";
  out << text;
  if (cfg.verbose)
    err << "plain bisection: " << rep.plain.evaluations << " maximizations; tilde: " << rep.tilde.evaluations << "\n";
  if (!detail::write_file(cfg.out_path, text, err)) return 1;
  if (!rep.plain.converged || !rep.tilde.converged) {
    err << "error: maximization did not converge\n";
    return 2;
  }
  return 0;
}

/// The beta grid from --beta or --beta-min/--beta-max/--beta-step.
inline std::optional<std::vector<double>> beta_grid(const RunConfig& cfg, std::ostream& err) {
  std::vector<double> grid;
  if (cfg.beta) {
    grid.push_back(*cfg.beta);
  } else if (cfg.beta_min && cfg.beta_max && cfg.beta_step) {
    if (!(*cfg.beta_step > 0.0) || *cfg.beta_max < *cfg.beta_min) {
      err << "error: empty beta grid\n";
      return std::nullopt;
    }
    const auto n = static_cast<long>(std::floor((*cfg.beta_max - *cfg.beta_min) / *cfg.beta_step + 1e-9)) + 1;
    for (long i = 0; i < n; ++i) grid.push_back(*cfg.beta_min + static_cast<double>(i) * *cfg.beta_step);
  } else {
    err << "error: scan needs --beta or --beta-min/--beta-max/--beta-step\n";
    return std::nullopt;
  }
  for (double b : grid)
    if (!(b >= 0.0)) {
      err << "error: beta must be nonnegative\n";
      return std::nullopt;
    }
  return grid;
}

/// CSV rows per beta: max f, argmax, top eigenvalue of M(beta), max f-tilde.
inline int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::check_tolerances(cfg, err)) return 1;
  auto model = detail::load(cfg, err);
  if (!model) return 1;
  auto grid = beta_grid(cfg, err);
  if (!grid) return 1;

  MaximizeOptions opt;
  opt.tol_zero = cfg.tolerances.tol_zero;
  std::ostringstream csv;
  csv << detail::provenance_line(*model) << "\n" << kScanHeader << "\n";
  bool converged = true;
  for (double beta : *grid) {
    const auto plain = maximize_f(*model, beta, Objective::plain, opt);
    const auto tilde = maximize_f(*model, beta, Objective::tilde, opt);
    converged = converged && plain.converged && tilde.converged;
    std::string argmax;
    for (Eigen::Index s = 0; s < plain.argmax.size(); ++s) argmax += (s ? ";" : "") + detail::fmt(plain.argmax[s]);
    csv << detail::fmt(beta) << "," << detail::fmt(plain.value) << "," << argmax << ","
        << detail::fmt(max_eigenvalue(hessian_at_zero(*model, beta))) << "," << detail::fmt(tilde.value) << "\n";
    if (cfg.verbose)
      err << "beta=" << detail::fmt(beta) << " starts=" << plain.starts_used << " iterations=" << plain.iterations
          << " grid=" << plain.grid_points << "\n";
  }
  out << csv.str();
  if (!detail::write_file(cfg.out_path, csv.str(), err)) return 1;
  if (!converged) {
    err << "error: maximization did not converge\n";
    return 2;
  }
  return 0;
}

struct CheckOutcome {
  std::string name;
  bool passed = false;
  double residual = 0.0;
  double threshold = 0.0;
  std::string detail;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  // splitmix64 finalizer over (seed, k)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::string estimator_row(double beta, int N, const EstimatorResult& r) {
  return fmt(beta) + "," + std::to_string(N) + "," + fmt(r.estimate) + "," + fmt(r.std_error) + "," +
         fmt(r.prediction) + "," + fmt(r.residual) + "\n";
}

inline nlohmann::ordered_json estimator_json(const EstimatorResult& r) {
  nlohmann::ordered_json j;
  j["estimate"] = std::isfinite(r.estimate) ? nlohmann::ordered_json(r.estimate) : nlohmann::ordered_json(nullptr);
  j["std_error"] = std::isfinite(r.std_error) ? nlohmann::ordered_json(r.std_error) : nlohmann::ordered_json(nullptr);
  j["n_samples"] = r.n_samples;
  j["seed"] = r.seed;
  j["prediction"] = r.prediction;
  j["residual"] = std::isfinite(r.residual) ? nlohmann::ordered_json(r.residual) : nlohmann::ordered_json(nullptr);
  if (std::isfinite(r.effective_sample_size)) j["effective_sample_size"] = r.effective_sample_size;
  if (r.hits >= 0) j["hits"] = r.hits;
  j["warnings"] = r.warnings;
  return j;
}

}  // namespace detail

/// Monte Carlo invariant battery. Writes a JSON summary to `out` (and --out)
/// and estimator rows to --csv.
inline int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::check_tolerances(cfg, err)) return 1;
  auto model = detail::load(cfg, err);
  if (!model) return 1;
  if (cfg.N <= 0 || cfg.samples <= 0 || cfg.disorder_samples <= 1) {
    err << "error: N and sample counts must be positive\n";
    return 1;
  }
  FiniteModel fm;
  try {
    fm = build_finite_model(*model, cfg.N);
    check_tensor_budget(fm);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  const CoefficientLaw law = cfg.mutate_prefactor ? CoefficientLaw::missing_factorial : CoefficientLaw::exact;
  const double xi1 = model->xi_one();
  std::vector<CheckOutcome> checks;
  std::ostringstream csv;
  csv << detail::provenance_line(*model) << "\n" << kEstimatorHeader << "\n";
  nlohmann::ordered_json estimators = nlohmann::ordered_json::object();

  // 1. Coefficient law: tuple sum against N xi(R).
  {
    double worst = 0.0;
    PhiloxStream rng(cfg.seed, StreamTag::scratch, 0);
    const Configuration base = sample_uniform(fm, rng);
    std::vector<std::pair<Configuration, Configuration>> pairs{{base, base}};
    Configuration neg = base;
    for (double& v : neg.coords) v = -v;
    pairs.emplace_back(base, neg);
    for (int k = 0; k < 8; ++k) {
      Configuration a = sample_uniform(fm, rng);
      Configuration b = sample_uniform(fm, rng);
      pairs.emplace_back(std::move(a), std::move(b));
    }
    for (const auto& [a, b] : pairs) worst = std::max(worst, covariance_routes(fm, a, b, law).rel_err);
    checks.push_back({"covariance_exact", worst <= 1e-10, worst, 1e-10,
                      "max relative error between tuple sum and N xi(R) over 10 pairs"});
  }

  // 2. Empirical disorder covariance at a fixed pair.
  {
    PhiloxStream rng(cfg.seed, StreamTag::scratch, 1);
    const Configuration a = sample_uniform(fm, rng);
    const Configuration b = sample_uniform(fm, rng);
    const double target_ab = fm.N * eval(model->mixture(), overlap(fm, a, b));
    const double target_aa = fm.N * xi1;
    std::vector<double> prod_ab, prod_aa;
    for (int k = 0; k < cfg.disorder_samples; ++k) {
      const auto dis = sample_disorder(fm, detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(k)),
                                       kDefaultTensorBudget, law);
      const double ha = evaluate_H(dis, a);
      const double hb = evaluate_H(dis, b);
      prod_ab.push_back(ha * hb);
      prod_aa.push_back(ha * ha);
    }
    auto zscore = [](const std::vector<double>& v, double target) {
      const double n = static_cast<double>(v.size());
      const double mean = spinglass::detail::pairwise_sum(v) / n;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double se = std::sqrt(ss / (n - 1.0) / n);
      return std::abs(mean - target) / se;
    };
    const double z = std::max(zscore(prod_ab, target_ab), zscore(prod_aa, target_aa));
    checks.push_back({"empirical_covariance", z <= 5.0, z, 5.0,
                      "z-score of empirical E[H H'] and E[H^2] against N xi(R), N xi(1)"});
  }

  // 3-4. Free energy and level set at beta_m / 2.
  const double bm = beta_m(*model, cfg.tolerances);
  const double beta = std::isfinite(bm) ? 0.5 * bm : 0.5;
  {
    const auto dis = sample_disorder(fm, cfg.seed, kDefaultTensorBudget, law);
    EstimatorOptions eo{cfg.samples, cfg.seed, cfg.workers};
    const auto fe = estimate_free_energy(fm, dis, beta, eo);
    checks.push_back({"free_energy", std::abs(fe.residual) <= 0.1, fe.residual, 0.1,
                      "plain MC (1/N) log Z against beta^2 xi(1) / 2 at beta_m / 2"});
    csv << detail::estimator_row(beta, fm.N, fe);
    estimators["free_energy"] = detail::estimator_json(fe);

    const auto ls = estimate_level_set(fm, dis, beta, cfg.epsilon, eo);
    const bool ok = ls.hits > 0 && std::abs(ls.residual) <= 0.15;
    checks.push_back({"level_set", ok, ls.residual, 0.15,
                      "(1/N) log mu(L_beta(eps)) against -beta^2 xi(1) / 2"});
    csv << detail::estimator_row(beta, fm.N, ls);
    estimators["level_set"] = detail::estimator_json(ls);
  }

  // 5-6. Exact second moment: normalization and convergence toward the limit.
  nlohmann::ordered_json z2_table = nlohmann::ordered_json::array();
  if (model->num_species() <= 3) {
    const double limit = beta * beta * xi1 + maximize_f(*model, beta, Objective::plain).value;
    double worst_norm = 0.0;
    bool shrinking = true;
    bool nonnegative = true;
    double prev = std::numeric_limits<double>::infinity();
    double last = 0.0;
    for (int n : {50, 100, 200, 400}) {
      const auto fmn = build_finite_model(*model, n);
      const auto z0 = log_E_Z2_exact(fmn, 0.0);
      const auto zb = log_E_Z2_exact(fmn, beta);
      worst_norm = std::max(worst_norm, std::abs(z0.value));
      const double resid = zb.value - limit;
      nonnegative = nonnegative && resid >= -1e-8;
      shrinking = shrinking && std::abs(resid) < prev;
      prev = std::abs(resid);
      last = resid;
      EstimatorResult row;
      row.estimate = zb.value;
      row.std_error = zb.error_estimate;
      row.prediction = limit;
      row.residual = resid;
      csv << detail::estimator_row(beta, n, row);
      z2_table.push_back({{"N", n}, {"value", zb.value}, {"limit", limit}, {"residual", resid},
                          {"normalization", z0.value}, {"quadrature_error", zb.error_estimate}});
    }
    checks.push_back({"second_moment_normalization", worst_norm <= 1e-8, worst_norm, 1e-8,
                      "|log_E_Z2_exact| at beta = 0 for N in {50,100,200,400}"});
    checks.push_back({"second_moment_convergence", shrinking && nonnegative && std::abs(last) <= 0.02, last, 0.02,
                      "residual against beta^2 xi(1) + max f_beta: nonnegative, shrinking in N, small at N = 400"});
  }

  bool all = true;
  nlohmann::ordered_json report;
  report["tool_version"] = kToolVersion;
  report["model_hash"] = model_hash(*model);
  report["seed"] = cfg.seed;
  report["N"] = fm.N;
  report["block_sizes"] = fm.block_sizes;
  report["beta"] = beta;
  report["samples"] = cfg.samples;
  report["mutated_prefactor"] = cfg.mutate_prefactor;
  report["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) {
    all = all && c.passed;
    report["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"residual", c.residual},
                                {"threshold", c.threshold}, {"detail", c.detail}});
    err << (c.passed ? "PASS " : "FAIL ") << c.name << "  residual=" << detail::fmt(c.residual)
        << " threshold=" << detail::fmt(c.threshold) << "\n";
  }
  report["estimators"] = estimators;
  report["second_moment"] = z2_table;
  report["all_passed"] = all;

  const std::string text = report.dump(2) + "\n";
  out << text;
  if (!detail::write_file(cfg.out_path, text, err)) return 1;
  if (!detail::write_file(cfg.csv_path, csv.str(), err)) return 1;
  return all ? 0 : 3;
}

/// Band free energy around a near-typical point, as a function of a uniform
/// overlap r, against 1/2 beta^2 xi(1) + f_beta(r).
inline int cmd_band_probe(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (!detail::check_tolerances(cfg, err)) return 1;
  auto model = detail::load(cfg, err);
  if (!model) return 1;
  if (!(cfg.r_step > 0.0) || !(cfg.r_max >= 0.0) || !(cfg.r_max < 1.0)) {
    err << "error: band grid needs 0 <= r-max < 1 and r-step > 0\n";
    return 1;
  }
  FiniteModel fm;
  try {
    fm = build_finite_model(*model, cfg.N);
    check_tensor_budget(fm);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  double beta = 0.0;
  if (cfg.beta) {
    beta = *cfg.beta;
  } else {
    const double bm = beta_m(*model, cfg.tolerances);
    beta = std::isfinite(bm) ? 0.5 * bm : 0.5;
  }
  const auto dis = sample_disorder(fm, cfg.seed);

  // Center: first uniform draw inside L_beta(eps), else the closest one seen.
  const double target = beta * model->xi_one();
  Configuration center;
  double best_gap = std::numeric_limits<double>::infinity();
  long draws = 0;
  for (; draws < 200'000 && best_gap >= cfg.epsilon; ++draws) {
    PhiloxStream rng(cfg.seed, StreamTag::scratch, 1000 + static_cast<std::uint64_t>(draws));
    Configuration c = sample_uniform(fm, rng);
    const double gap = std::abs(evaluate_H(dis, c) / fm.N - target);
    if (gap < best_gap) {
      best_gap = gap;
      center = std::move(c);
    }
  }

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  const auto n = static_cast<long>(std::floor(cfg.r_max / cfg.r_step + 1e-9)) + 1;
  for (long i = 0; i < n; ++i) {
    const double r = static_cast<double>(i) * cfg.r_step;
    const SpeciesVector rv = SpeciesVector::Constant(static_cast<Eigen::Index>(fm.num_species()), r);
    const auto res = estimate_band_free_energy(fm, dis, center, rv, beta,
                                               {cfg.samples, detail::mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i)), cfg.workers});
    auto row = detail::estimator_json(res);
    row["r"] = r;
    rows.push_back(row);
  }
  nlohmann::ordered_json report;
  report["tool_version"] = kToolVersion;
  report["model_hash"] = model_hash(*model);
  report["seed"] = cfg.seed;
  report["N"] = fm.N;
  report["beta"] = beta;
  report["center"] = {{"H_over_N", evaluate_H(dis, center) / fm.N}, {"target", target},
                      {"in_level_set", best_gap < cfg.epsilon}, {"draws", draws}};
  report["rows"] = rows;
  const std::string text = report.dump(2) + "\n";
  out << text;
  if (!detail::write_file(cfg.out_path, text, err)) return 1;
  return 0;
}

inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.subcommand == "critical") return cmd_critical(cfg, out, err);
  if (cfg.subcommand == "scan") return cmd_scan(cfg, out, err);
  if (cfg.subcommand == "verify") return cmd_verify(cfg, out, err);
  if (cfg.subcommand == "band-probe") return cmd_band_probe(cfg, out, err);
  err << "error: unknown subcommand '" << cfg.subcommand << "'\n";
  return 1;
}

}  // namespace spinglass::cli
