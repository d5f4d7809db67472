#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the code paths it is used to check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spinglass/mixture.hpp"
#include "spinglass/model.hpp"

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Scalar = std::function<double(const Vec&)>;

inline Vec central_gradient(const Scalar& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

/// Central differences with one Richardson step: O(h^4) truncation.
inline Vec fd_gradient(const Scalar& f, const Vec& x, double h = 1e-3) {
  return (4 * central_gradient(f, x, h / 2) - central_gradient(f, x, h)) / 3;
}

inline Mat second_differences(const Scalar& f, const Vec& x, double h) {
  const Eigen::Index n = x.size();
  Mat H(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    H(i, i) = (f(xp) - 2 * f0 + f(xm)) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Vec a = x, b = x, c = x, d = x;
      a[i] += h, a[j] += h;
      b[i] += h, b[j] -= h;
      c[i] -= h, c[j] += h;
      d[i] -= h, d[j] -= h;
      H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(d)) / (4 * h * h);
    }
  }
  return H;
}

/// Second differences of f itself (not of an analytic gradient), with one
/// Richardson step: O(h^4) truncation.
inline Mat fd_hessian(const Scalar& f, const Vec& x, double h = 2e-3) {
  return (4 * second_differences(f, x, h / 2) - second_differences(f, x, h)) / 3;
}

/// Plain bisection for a sign change of f on [lo, hi].
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// beta_m of the pure p-spin xi = r^p (p >= 3): the tangency f = 0, f' = 0 at r* in (0,1).
/// f' = 0 gives beta^2 = r^{2-p} / (p (1 - r^2)); substituting into f = 0 leaves
/// 1/2 log(1 - r^2) + r^2 / (p (1 - r^2)) = 0.
inline double pure_p_beta_m(int p) {
  auto phi = [p](double r) { return 0.5 * std::log1p(-r * r) + r * r / (p * (1 - r * r)); };
  const double r = bisect_root(phi, 1e-3, 1 - 1e-12);
  return std::sqrt(std::pow(r, 2 - p) / (p * (1 - r * r)));
}

/// Talagrand beta_c of the pure p-spin: tangency of g = log(1-r) + r + beta^2 r^p.
/// g' = 0 gives beta^2 = r^{2-p} / (p (1 - r)); then log(1 - r) + r + r^2 / (p (1 - r)) = 0.
inline double pure_p_beta_c(int p) {
  auto psi = [p](double r) { return std::log1p(-r) + r + r * r / (p * (1 - r)); };
  const double r = bisect_root(psi, 1e-3, 1 - 1e-12);
  return std::sqrt(std::pow(r, 2 - p) / (p * (1 - r)));
}

/// Random mixture over S species with terms of total degree in [min_deg, max_deg].
inline spinglass::Mixture random_mixture(std::mt19937_64& rng, std::size_t S, int min_deg, int max_deg,
                                         int n_terms) {
  std::uniform_int_distribution<int> deg(min_deg, max_deg);
  std::uniform_int_distribution<std::size_t> sp(0, S - 1);
  std::uniform_real_distribution<double> coef(0.1, 1.5);
  spinglass::Mixture::TermMap terms;
  for (int t = 0; t < n_terms; ++t) {
    std::vector<int> d(S, 0);
    const int k = deg(rng);
    for (int j = 0; j < k; ++j) ++d[sp(rng)];
    terms[spinglass::MultiIndex(d)] = coef(rng);
  }
  return spinglass::Mixture(S, terms);
}

inline Vec random_point(std::mt19937_64& rng, std::size_t S, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec x(static_cast<Eigen::Index>(S));
  for (auto& v : x) v = u(rng);
  return x;
}

/// Assumption (A) by brute force: xi > 0 at the indicator of every nonempty
/// subset T, and on a grid over [0,1]^S minus the origin.
inline bool assumption_a_brute_force(const spinglass::Mixture& m) {
  const std::size_t S = m.num_species();
  for (unsigned mask = 1; mask < (1u << S); ++mask) {
    Vec x = Vec::Zero(static_cast<Eigen::Index>(S));
    for (std::size_t s = 0; s < S; ++s)
      if (mask & (1u << s)) x[static_cast<Eigen::Index>(s)] = 1.0;
    double v = 0.0;
    for (const auto& [p, c] : m.terms()) {
      double mono = c;
      for (std::size_t s = 0; s < S; ++s) mono *= std::pow(x[static_cast<Eigen::Index>(s)], p[s]);
      v += mono;
    }
    if (!(v > 0.0)) return false;
  }
  return true;
}

/// Monomial-by-monomial xi written independently of spinglass::eval.
inline double xi_direct(const spinglass::Mixture& m, const Vec& x) {
  double v = 0.0;
  for (const auto& [p, c] : m.terms()) {
    double mono = c;
    for (std::size_t s = 0; s < p.size(); ++s) mono *= std::pow(x[static_cast<Eigen::Index>(s)], p[s]);
    v += mono;
  }
  return v;
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

}  // namespace oracle
