#pragma once

// Thresholds beta_m, beta_m_tilde, beta_H, the regular/singular verdict and the
// single-species Talagrand beta_c oracle.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <json.hpp>

#include "spinglass/landscape.hpp"
#include "spinglass/model.hpp"

namespace spinglass {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Tolerances {
  double tol_zero = 1e-10;   // max value <= tol_zero counts as zero
  double tol_sing = 1e-6;    // relative to max(lambda) + beta^2 ||Q||
  double beta_tol = 1e-9;    // absolute bisection tolerance on beta
  double beta_cap = 1e6;     // give up bracketing beyond this
};

/// One side of a threshold bisection: the maximizer observed at a bracket end.
struct Witness {
  double beta = 0.0;
  SpeciesVector argmax;
  double value = 0.0;
};

struct ThresholdResult {
  double beta = 0.0;  // largest beta known to satisfy the predicate, or +inf
  Witness below;      // predicate holds
  Witness above;      // predicate fails (absent when beta is +inf)
  int evaluations = 0;
  bool bracket_ok = true;  // predicate held at beta = 0
  bool converged = true;   // every maximization reported convergence
};

namespace detail {

/// Largest beta in [0, cap] with pred(beta) true, for a predicate that is
/// true on [0, b*] and false after. `probe` returns (holds, witness).
template <class Probe>
ThresholdResult bisect_threshold(Probe probe, const Tolerances& tol) {
  ThresholdResult out;
  auto [ok0, w0] = probe(0.0);
  ++out.evaluations;
  out.below = w0;
  if (!ok0) {
    out.bracket_ok = false;
    out.beta = 0.0;
    return out;
  }
  double lo = 0.0;
  double hi = 1.0;
  Witness wlo = w0;
  Witness whi;
  while (true) {
    auto [ok, w] = probe(hi);
    ++out.evaluations;
    if (!ok) {
      whi = w;
      break;
    }
    lo = hi;
    wlo = w;
    if (hi >= tol.beta_cap) {
      out.beta = kInfinity;
      out.below = wlo;
      return out;
    }
    hi *= 2.0;
  }
  while (hi - lo > tol.beta_tol) {
    const double mid = 0.5 * (lo + hi);
    auto [ok, w] = probe(mid);
    ++out.evaluations;
    if (ok) {
      lo = mid;
      wlo = w;
    } else {
      hi = mid;
      whi = w;
    }
  }
  out.beta = lo;
  out.below = wlo;
  out.above = whi;
  return out;
}

}  // namespace detail

/// Bisection for the largest beta with max_r objective = objective(0) = 0.
///
/// The predicate is [max value <= tol_zero] and [lambda_max(M(beta)) <= 0].
/// The second clause is necessary for the first (a positive eigenvalue of M has
/// a nonnegative eigenvector, along which the objective rises from 0) and
/// resolves degenerate tangencies that a value threshold alone cannot.
inline ThresholdResult threshold_search(const ModelSpec& model, Objective objective,
                                        const Tolerances& tol = {}, const MaximizeOptions& opt = {}) {
  if (!(model.xi_one() > 0.0)) throw std::domain_error("threshold search requires xi(1) > 0");
  MaximizeOptions mopt = opt;
  mopt.tol_zero = tol.tol_zero;
  bool all_converged = true;
  auto probe = [&](double beta) {
    const auto res = maximize_f(model, beta, objective, mopt);
    all_converged = all_converged && res.converged;
    const bool locally_flat = max_eigenvalue(hessian_at_zero(model, beta)) <= 0.0;
    return std::pair{res.value <= tol.tol_zero && locally_flat, Witness{beta, res.argmax, res.value}};
  };
  auto out = detail::bisect_threshold(probe, tol);
  out.converged = all_converged;
  return out;
}

inline double beta_m(const ModelSpec& model, const Tolerances& tol = {}) {
  return threshold_search(model, Objective::plain, tol).beta;
}

inline double beta_m_tilde(const ModelSpec& model, const Tolerances& tol = {}) {
  return threshold_search(model, Objective::tilde, tol).beta;
}

/// Smallest beta >= 0 at which M(beta) acquires a nonnegative eigenvalue:
/// 1/sqrt(mu_max) with mu_max the top eigenvalue of Lambda^{-1/2} Q Lambda^{-1/2}.
inline double beta_hessian_singular(const ModelSpec& model) {
  const SpeciesMatrix q = degree_two_matrix(model.mixture());
  const SpeciesVector inv_sqrt = model.lambda().cwiseSqrt().cwiseInverse();
  const SpeciesMatrix scaled = inv_sqrt.asDiagonal() * q * inv_sqrt.asDiagonal();
  const double mu = max_eigenvalue(scaled);
  if (!(mu > 0.0)) return kInfinity;
  return 1.0 / std::sqrt(mu);
}

/// Scale against which tol_sing is applied: max lambda + beta^2 ||Q||_2.
inline double singularity_scale(const ModelSpec& model, double beta) {
  const SpeciesMatrix q = degree_two_matrix(model.mixture());
  Eigen::SelfAdjointEigenSolver<SpeciesMatrix> es(q, Eigen::EigenvaluesOnly);
  return model.lambda().maxCoeff() + beta * beta * es.eigenvalues().cwiseAbs().maxCoeff();
}

struct NsdCheck {
  double lambda_max = 0.0;
  bool is_nsd = false;
};

inline NsdCheck check_nsd(const ModelSpec& model, double beta, const Tolerances& tol = {}) {
  const double lmax = max_eigenvalue(hessian_at_zero(model, beta));
  return {lmax, lmax <= tol.tol_sing * singularity_scale(model, beta)};
}

/// sup_{r in [0,1)} g_beta(r) for a single-species model: grid scan followed by
/// Brent refinement around the best grid cells.
inline std::pair<double, double> sup_g_beta(const ModelSpec& model, double beta) {
  if (model.num_species() != 1)
    throw std::invalid_argument("g_beta is defined for single-species models only");
  std::vector<double> grid;
  constexpr int n = 2000;
  for (int i = 0; i < n; ++i) grid.push_back(static_cast<double>(i) / n);
  for (int k = 4; k <= 8; ++k) grid.push_back(1.0 - std::pow(10.0, -k));
  std::vector<double> values;
  values.reserve(grid.size());
  for (double r : grid) values.push_back(g_beta(model, beta, r));

  double best_r = 0.0;
  double best_v = 0.0;
  auto neg = [&](double r) { return -g_beta(model, beta, r); };
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    if (values[i] < values[i - 1] || values[i] < values[i + 1]) continue;
    auto [r, nv] = boost::math::tools::brent_find_minima(neg, grid[i - 1], grid[i + 1], 52);
    if (-nv > best_v) {
      best_v = -nv;
      best_r = r;
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (values[i] > best_v) {
      best_v = values[i];
      best_r = grid[i];
    }
  return {best_r, best_v};
}

/// Single-species beta_c from the criterion sup_r g_beta(r) <= 0, with the
/// same bracketing scheme as beta_m and the local clause g''(0) <= 0.
inline ThresholdResult talagrand_search(const ModelSpec& model, const Tolerances& tol = {}) {
  if (model.num_species() != 1)
    throw std::invalid_argument("beta_c_talagrand is defined for single-species models only");
  const double curvature = hessian(model.mixture(), SpeciesVector::Zero(1))(0, 0);
  auto probe = [&](double beta) {
    auto [r, v] = sup_g_beta(model, beta);
    const bool locally_flat = beta * beta * curvature - 1.0 <= 0.0;
    return std::pair{v <= tol.tol_zero && locally_flat, Witness{beta, SpeciesVector::Constant(1, r), v}};
  };
  return detail::bisect_threshold(probe, tol);
}

inline double beta_c_talagrand(const ModelSpec& model, const Tolerances& tol = {}) {
  return talagrand_search(model, tol).beta;
}

enum class Verdict { equal, strictly_less, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::equal: return "EQUAL";
    case Verdict::strictly_less: return "STRICTLY_LESS";
    case Verdict::inconclusive: return "INCONCLUSIVE";
  }
  return "?";
}

struct CritReport {
  double beta_m = 0.0;
  double beta_m_tilde = 0.0;
  double beta_H = kInfinity;
  std::vector<double> spectrum_at_beta_m;  // ascending
  double lambda_max_at_beta_m = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::optional<double> beta_c;  // reported only when verdict is EQUAL
  bool assumption_a = false;
  ThresholdResult plain;
  ThresholdResult tilde;
  Tolerances tolerances;
  std::vector<std::string> notes;
};

inline CritReport verdict(const ModelSpec& model, const Tolerances& tol = {}) {
  CritReport rep;
  rep.tolerances = tol;
  rep.assumption_a = check_assumption_a(model.mixture());
  rep.plain = threshold_search(model, Objective::plain, tol);
  rep.tilde = threshold_search(model, Objective::tilde, tol);
  rep.beta_m = rep.plain.beta;
  rep.beta_m_tilde = rep.tilde.beta;
  rep.beta_H = beta_hessian_singular(model);

  if (!rep.plain.bracket_ok || !rep.tilde.bracket_ok) rep.notes.push_back("predicate failed at beta = 0");
  if (!rep.plain.converged || !rep.tilde.converged)
    rep.notes.push_back("a maximization did not converge; thresholds may be inaccurate");

  if (!std::isfinite(rep.beta_m)) {
    rep.notes.push_back("beta_m not bracketed below beta_cap");
    rep.verdict = Verdict::inconclusive;
    return rep;
  }

  Eigen::SelfAdjointEigenSolver<SpeciesMatrix> es(hessian_at_zero(model, rep.beta_m), Eigen::EigenvaluesOnly);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) rep.spectrum_at_beta_m.push_back(es.eigenvalues()[i]);
  rep.lambda_max_at_beta_m = es.eigenvalues().maxCoeff();
  const double band = tol.tol_sing * singularity_scale(model, rep.beta_m);

  if (!rep.assumption_a) {
    rep.notes.push_back("assumption (A) fails; verdict withheld");
    rep.verdict = Verdict::inconclusive;
  } else if (std::abs(rep.lambda_max_at_beta_m) <= band) {
    rep.verdict = Verdict::equal;
    rep.beta_c = rep.beta_m;
  } else if (rep.lambda_max_at_beta_m < -band) {
    rep.verdict = Verdict::strictly_less;
  } else {
    rep.notes.push_back("top eigenvalue of M(beta_m) positive beyond tolerance");
    rep.verdict = Verdict::inconclusive;
  }
  return rep;
}

namespace detail {

inline nlohmann::ordered_json vector_json(const SpeciesVector& v) {
  auto a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::ordered_json number_or_null(double x) {
  return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json witness_json(const Witness& w) {
  return {{"beta", w.beta}, {"argmax", vector_json(w.argmax)}, {"value", w.value}};
}

inline nlohmann::ordered_json threshold_json(const ThresholdResult& t) {
  nlohmann::ordered_json j;
  j["beta"] = number_or_null(t.beta);
  j["below"] = witness_json(t.below);
  j["above"] = t.above.argmax.size() ? witness_json(t.above) : nlohmann::ordered_json(nullptr);
  j["evaluations"] = t.evaluations;
  j["bracket_ok"] = t.bracket_ok;
  j["converged"] = t.converged;
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const CritReport& rep, const ModelSpec& model) {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["model_hash"] = model_hash(model);
  j["model"] = to_json(model);
  j["beta_m"] = detail::number_or_null(rep.beta_m);
  j["beta_m_tilde"] = detail::number_or_null(rep.beta_m_tilde);
  j["beta_H"] = detail::number_or_null(rep.beta_H);
  j["beta_H_finite"] = std::isfinite(rep.beta_H);
  j["spectrum_at_beta_m"] = rep.spectrum_at_beta_m;
  j["lambda_max_at_beta_m"] = rep.lambda_max_at_beta_m;
  j["verdict"] = to_string(rep.verdict);
  j["beta_c"] = rep.beta_c ? nlohmann::ordered_json(*rep.beta_c) : nlohmann::ordered_json(nullptr);
  j["assumption_A"] = rep.assumption_a;
  j["witnesses"] = {{"plain", detail::threshold_json(rep.plain)}, {"tilde", detail::threshold_json(rep.tilde)}};
  j["tolerances"] = {{"tol_zero", rep.tolerances.tol_zero},
                     {"tol_sing", rep.tolerances.tol_sing},
                     {"beta_tol", rep.tolerances.beta_tol},
                     {"beta_cap", rep.tolerances.beta_cap}};
  j["notes"] = rep.notes;
  return j;
}

}  // namespace spinglass
