#pragma once

// Deterministic functionals on overlap space and their global maximization:
//
//   f_beta(r)       = 1/2 sum_s lambda(s) log(1 - r(s)^2) + beta^2 xi(r)
//   f_tilde_beta(r) = 1/2 sum_s lambda(s) log(1 - r(s)^2) + beta^2 xi(1) xi(r) / (xi(1) + xi(r))
//   g_beta(r)       = log(1 - r) + r + beta^2 xi(r)            (single species)

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinglass/mixture.hpp"
#include "spinglass/model.hpp"

namespace spinglass {

enum class Objective { plain, tilde };

inline const char* to_string(Objective o) { return o == Objective::plain ? "plain" : "tilde"; }

namespace detail {

inline void check_landscape_domain(const ModelSpec& model, const SpeciesVector& r) {
  if (static_cast<std::size_t>(r.size()) != model.num_species())
    throw std::invalid_argument("overlap vector length does not match species count");
  for (Eigen::Index s = 0; s < r.size(); ++s)
    if (!(r[s] >= 0.0 && r[s] < 1.0))
      throw std::domain_error("overlap r(" + std::to_string(s) + ") = " + std::to_string(r[s]) +
                              " outside [0,1)");
}

inline double entropy(const SpeciesVector& lambda, const SpeciesVector& r) {
  double sum = 0.0;
  for (Eigen::Index s = 0; s < r.size(); ++s) sum += lambda[s] * std::log1p(-r[s] * r[s]);
  return 0.5 * sum;
}

/// Unchecked objective evaluation; the box constraint is the caller's job.
struct Landscape {
  const ModelSpec& model;
  double beta;
  Objective objective;
  SpeciesVector lambda = model.lambda();
  double xi1 = model.xi_one();

  double value(const SpeciesVector& r) const {
    const double xi = eval(model.mixture(), r);
    const double b2 = beta * beta;
    const double energy = objective == Objective::plain ? b2 * xi : b2 * xi1 * xi / (xi1 + xi);
    return entropy(lambda, r) + energy;
  }

  SpeciesVector gradient(const SpeciesVector& r) const {
    SpeciesVector g = grad(model.mixture(), r) * energy_slope(r);
    for (Eigen::Index s = 0; s < r.size(); ++s) g[s] -= lambda[s] * r[s] / (1.0 - r[s] * r[s]);
    return g;
  }

  SpeciesMatrix hess(const SpeciesVector& r) const {
    const SpeciesMatrix hx = hessian(model.mixture(), r);
    SpeciesMatrix h = hx * energy_slope(r);
    if (objective == Objective::tilde) {
      const SpeciesVector gx = grad(model.mixture(), r);
      const double xi = eval(model.mixture(), r);
      const double curv = -2.0 * beta * beta * xi1 * xi1 / std::pow(xi1 + xi, 3);
      h += curv * gx * gx.transpose();
    }
    for (Eigen::Index s = 0; s < r.size(); ++s) {
      const double q = 1.0 - r[s] * r[s];
      h(s, s) -= lambda[s] * (1.0 + r[s] * r[s]) / (q * q);
    }
    return h;
  }

 private:
  // d(energy)/d(xi)
  double energy_slope(const SpeciesVector& r) const {
    const double b2 = beta * beta;
    if (objective == Objective::plain) return b2;
    const double xi = eval(model.mixture(), r);
    return b2 * xi1 * xi1 / ((xi1 + xi) * (xi1 + xi));
  }
};

}  // namespace detail

inline double f_beta(const ModelSpec& model, double beta, const SpeciesVector& r) {
  detail::check_landscape_domain(model, r);
  return detail::Landscape{model, beta, Objective::plain}.value(r);
}

inline double f_tilde_beta(const ModelSpec& model, double beta, const SpeciesVector& r) {
  detail::check_landscape_domain(model, r);
  if (model.xi_one() == 0.0) throw std::domain_error("f_tilde_beta requires xi(1) > 0");
  return detail::Landscape{model, beta, Objective::tilde}.value(r);
}

inline double objective_value(const ModelSpec& model, double beta, Objective obj, const SpeciesVector& r) {
  return obj == Objective::plain ? f_beta(model, beta, r) : f_tilde_beta(model, beta, r);
}

inline double g_beta(const ModelSpec& model, double beta, double r) {
  if (model.num_species() != 1)
    throw std::invalid_argument("g_beta is defined for single-species models only");
  if (!(r >= 0.0 && r < 1.0)) throw std::domain_error("g_beta requires r in [0,1)");
  return std::log1p(-r) + r + beta * beta * eval(model.mixture(), r);
}

inline SpeciesVector f_grad(const ModelSpec& model, double beta, const SpeciesVector& r) {
  detail::check_landscape_domain(model, r);
  return detail::Landscape{model, beta, Objective::plain}.gradient(r);
}

inline SpeciesMatrix f_hessian(const ModelSpec& model, double beta, const SpeciesVector& r) {
  detail::check_landscape_domain(model, r);
  return detail::Landscape{model, beta, Objective::plain}.hess(r);
}

/// M(beta) = -diag(lambda) + beta^2 Q, the Hessian of f_beta (and of
/// f_tilde_beta) at r = 0. Only the degree-two coefficients enter.
inline SpeciesMatrix hessian_at_zero(const ModelSpec& model, double beta) {
  SpeciesMatrix m = beta * beta * degree_two_matrix(model.mixture());
  m.diagonal() -= model.lambda();
  return m;
}

inline double max_eigenvalue(const SpeciesMatrix& m) {
  Eigen::SelfAdjointEigenSolver<SpeciesMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

struct MaximizeOptions {
  double tol_zero = 1e-10;
  double upper_clamp = 1.0 - 1e-8;
  int grid_per_axis = 200;  // dense certification pitch 1/grid_per_axis, |S| <= 3
  int max_iterations = 200;
  double gradient_tol = 1e-10;
};

struct MaximizeResult {
  SpeciesVector argmax;
  double value = 0.0;
  int starts_used = 0;
  bool converged = true;
  long iterations = 0;
  long grid_points = 0;
  /// Distinct candidates whose value is within tol_zero of the best.
  std::vector<SpeciesVector> near_maximizers;
};

namespace detail {

struct AscentOutcome {
  SpeciesVector x;
  double value;
  bool converged;
  int iterations;
};

inline SpeciesVector clamp_box(SpeciesVector x, double ub) {
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], 0.0, ub);
  return x;
}

/// Projected Newton ascent on [0, ub]^S with an Armijo backtracking search;
/// falls back to the projected gradient when the free block of the Hessian
/// is not negative definite.
inline AscentOutcome local_ascent(const Landscape& land, SpeciesVector x, const MaximizeOptions& opt) {
  const double ub = opt.upper_clamp;
  x = clamp_box(std::move(x), ub);
  double fx = land.value(x);
  const Eigen::Index S = x.size();
  for (int it = 0; it < opt.max_iterations; ++it) {
    const SpeciesVector g = land.gradient(x);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < S; ++i) {
      const bool pinned_low = x[i] <= 0.0 && g[i] <= 0.0;
      const bool pinned_high = x[i] >= ub && g[i] >= 0.0;
      if (!pinned_low && !pinned_high) free.push_back(i);
    }
    double pg = 0.0;
    for (auto i : free) pg = std::max(pg, std::abs(g[i]));
    if (free.empty() || pg <= opt.gradient_tol) return {x, fx, true, it};

    const auto nf = static_cast<Eigen::Index>(free.size());
    SpeciesVector gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) gf[a] = g[free[static_cast<std::size_t>(a)]];
    SpeciesVector df = gf;
    const SpeciesMatrix h = land.hess(x);
    SpeciesMatrix hf(nf, nf);
    for (Eigen::Index a = 0; a < nf; ++a)
      for (Eigen::Index b = 0; b < nf; ++b)
        hf(a, b) = h(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    Eigen::LLT<SpeciesMatrix> llt(-hf);
    bool newton = llt.info() == Eigen::Success;
    if (newton) df = llt.solve(gf);

    SpeciesVector d = SpeciesVector::Zero(S);
    for (Eigen::Index a = 0; a < nf; ++a) d[free[static_cast<std::size_t>(a)]] = df[a];
    double t = 1.0;
    if (!newton) t = std::min(1.0, 0.1 / std::max(d.cwiseAbs().maxCoeff(), 1e-300));

    bool moved = false;
    for (int ls = 0; ls < 80; ++ls, t *= 0.5) {
      SpeciesVector xn = clamp_box(x + t * d, ub);
      const double fn = land.value(xn);
      const double predicted = g.dot(xn - x);
      if (std::isfinite(fn) && fn >= fx + 1e-4 * predicted && fn >= fx) {
        moved = (xn - x).cwiseAbs().maxCoeff() > 0.0;
        const double gain = fn - fx;
        x = std::move(xn);
        fx = fn;
        if (!moved || (gain <= 1e-18 * std::max(1.0, std::abs(fx)) && (t * d).norm() < 1e-14))
          return {x, fx, pg <= 1e-7, it + 1};
        break;
      }
    }
    if (!moved) return {x, fx, pg <= 1e-7, it + 1};
  }
  const SpeciesVector g = land.gradient(x);
  double pg = 0.0;
  for (Eigen::Index i = 0; i < S; ++i) {
    const bool pinned_low = x[i] <= 0.0 && g[i] <= 0.0;
    const bool pinned_high = x[i] >= ub && g[i] >= 0.0;
    if (!pinned_low && !pinned_high) pg = std::max(pg, std::abs(g[i]));
  }
  return {x, fx, pg <= 1e-7, opt.max_iterations};
}

inline long grid_size(int n, Eigen::Index S) {
  long total = 1;
  for (Eigen::Index s = 0; s < S; ++s) total *= n;
  return total;
}

/// Evaluates the objective on the grid {0, 1/n, ..., (n-1)/n}^S and returns the
/// `keep` best points, best first. xi is written as a polynomial in the last
/// coordinate whose coefficients are rebuilt once per outer grid point.
inline std::vector<SpeciesVector> grid_scan(const Landscape& land, int n, std::size_t keep) {
  const Mixture& mix = land.model.mixture();
  const std::size_t S = mix.num_species();
  const std::size_t last = S - 1;
  int max_deg = 0;
  for (const auto& [p, c] : mix.terms())
    for (std::size_t s = 0; s < S; ++s) max_deg = std::max(max_deg, p[s]);

  // pow_table[s][i][d] = (i/n)^d; ent_table[s][i] = lambda(s)/2 log(1 - (i/n)^2)
  std::vector<std::vector<std::vector<double>>> pow_table(S);
  std::vector<std::vector<double>> ent_table(S);
  for (std::size_t s = 0; s < S; ++s) {
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / n;
      std::vector<double> pw(static_cast<std::size_t>(max_deg) + 1, 1.0);
      for (int d = 1; d <= max_deg; ++d) pw[static_cast<std::size_t>(d)] = pw[static_cast<std::size_t>(d) - 1] * x;
      pow_table[s].push_back(std::move(pw));
      ent_table[s].push_back(0.5 * land.lambda[static_cast<Eigen::Index>(s)] * std::log1p(-x * x));
    }
  }

  const double b2 = land.beta * land.beta;
  const bool tilde = land.objective == Objective::tilde;
  struct Entry {
    double value;
    std::vector<int> idx;
  };
  std::vector<Entry> best;
  std::vector<int> idx(S, 0);
  std::vector<double> coef(static_cast<std::size_t>(max_deg) + 1);
  while (true) {
    std::fill(coef.begin(), coef.end(), 0.0);
    double ent_outer = 0.0;
    for (std::size_t s = 0; s < last; ++s) ent_outer += ent_table[s][static_cast<std::size_t>(idx[s])];
    for (const auto& [p, c] : mix.terms()) {
      double w = c;
      for (std::size_t s = 0; s < last; ++s) w *= pow_table[s][static_cast<std::size_t>(idx[s])][static_cast<std::size_t>(p[s])];
      coef[static_cast<std::size_t>(p[last])] += w;
    }
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) / n;
      double xi = 0.0;
      for (int d = max_deg; d >= 0; --d) xi = xi * x + coef[static_cast<std::size_t>(d)];
      const double energy = tilde ? b2 * land.xi1 * xi / (land.xi1 + xi) : b2 * xi;
      const double v = ent_outer + ent_table[last][static_cast<std::size_t>(i)] + energy;
      if (best.size() < keep || v > best.back().value) {
        idx[last] = i;
        auto pos = std::find_if(best.begin(), best.end(), [&](const Entry& e) { return v > e.value; });
        best.insert(pos, {v, idx});
        if (best.size() > keep) best.pop_back();
      }
    }
    idx[last] = 0;
    std::size_t s = 0;
    while (s < last && ++idx[s] == n) idx[s++] = 0;
    if (s == last) break;
  }

  std::vector<SpeciesVector> out;
  for (const auto& e : best) {
    SpeciesVector x(static_cast<Eigen::Index>(S));
    for (std::size_t s = 0; s < S; ++s) x[static_cast<Eigen::Index>(s)] = static_cast<double>(e.idx[s]) / n;
    out.push_back(std::move(x));
  }
  return out;
}

/// Strict ordering used for tie-breaking: smaller norm first, then lexicographic.
inline bool canonical_less(const SpeciesVector& a, const SpeciesVector& b) {
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na != nb) return na < nb;
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace detail

/// Global maximum of f_beta (or f_tilde_beta) over [0,1)^S.
///
/// Multi-start projected Newton from the origin neighbourhood and a coarse grid,
/// plus a dense grid pass (pitch 1/grid_per_axis) for |S| <= 3 whose best points
/// seed further ascents. Among candidates within tol_zero of the best value the
/// one of smallest norm is returned.
inline MaximizeResult maximize_f(const ModelSpec& model, double beta, Objective objective,
                                 const MaximizeOptions& opt = {}) {
  const auto S = static_cast<Eigen::Index>(model.num_species());
  if (S > 6) throw std::invalid_argument("maximize_f supports at most 6 species");
  if (objective == Objective::tilde && model.xi_one() == 0.0)
    throw std::domain_error("tilde objective requires xi(1) > 0");
  const detail::Landscape land{model, beta, objective};

  struct Candidate {
    SpeciesVector x;
    double value;
  };
  std::vector<Candidate> candidates;
  candidates.push_back({SpeciesVector::Zero(S), 0.0});

  MaximizeResult result;
  std::vector<SpeciesVector> starts;

  // Origin neighbourhood: axes, diagonal and the Perron direction of M(beta).
  const double h = 1e-3;
  for (Eigen::Index s = 0; s < S; ++s) starts.push_back(h * SpeciesVector::Unit(S, s));
  starts.push_back(SpeciesVector::Constant(S, h));
  {
    Eigen::SelfAdjointEigenSolver<SpeciesMatrix> es(hessian_at_zero(model, beta));
    SpeciesVector v = es.eigenvectors().col(S - 1).cwiseAbs();
    if (v.norm() > 0) starts.push_back(h * v / v.norm());
  }

  // Coarse grid of starts.
  const std::vector<double> levels = S <= 3 ? std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9}
                                            : std::vector<double>{0.2, 0.5, 0.8};
  {
    std::vector<std::size_t> idx(static_cast<std::size_t>(S), 0);
    while (true) {
      SpeciesVector x(S);
      for (Eigen::Index s = 0; s < S; ++s) x[s] = levels[idx[static_cast<std::size_t>(s)]];
      starts.push_back(x);
      std::size_t s = 0;
      while (s < idx.size() && ++idx[s] == levels.size()) idx[s++] = 0;
      if (s == idx.size()) break;
    }
  }

  // Dense certification grid.
  if (S <= 3) {
    auto best = detail::grid_scan(land, opt.grid_per_axis, 4);
    result.grid_points = detail::grid_size(opt.grid_per_axis, S);
    for (auto& x : best) {
      starts.push_back(x);
      const double v = land.value(x);
      candidates.push_back({std::move(x), v});
    }
  }

  for (const auto& x0 : starts) {
    auto out = detail::local_ascent(land, x0, opt);
    result.iterations += out.iterations;
    ++result.starts_used;
    if (!out.converged) {
      // A start that stalls without reaching the best value found so far does
      // not compromise the answer; only flag stalls that could be the maximum.
      double best_so_far = -std::numeric_limits<double>::infinity();
      for (const auto& c : candidates) best_so_far = std::max(best_so_far, c.value);
      if (out.value >= best_so_far - opt.tol_zero) result.converged = false;
    }
    candidates.push_back({std::move(out.x), out.value});
  }

  double best_value = -std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) best_value = std::max(best_value, c.value);

  const Candidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (c.value < best_value - opt.tol_zero) continue;
    if (!chosen || detail::canonical_less(c.x, chosen->x)) chosen = &c;
    bool duplicate = false;
    for (const auto& m : result.near_maximizers)
      if ((m - c.x).cwiseAbs().maxCoeff() < 1e-6) duplicate = true;
    if (!duplicate) result.near_maximizers.push_back(c.x);
  }
  std::sort(result.near_maximizers.begin(), result.near_maximizers.end(), detail::canonical_less);
  result.argmax = chosen->x;
  result.value = land.value(chosen->x);
  return result;
}

}  // namespace spinglass
