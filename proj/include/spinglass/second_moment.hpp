#pragma once

// Exact finite-N second moment
//
//   (1/N) log E Z^2 = beta^2 xi(1)
//       + (1/N) log int_{[-1,1]^S} prod_s (w_{N_s-1}/w_{N_s}) (1 - r_s^2)^{(N_s-3)/2} e^{N beta^2 xi(r)} dr
//
// with w_d = 2 pi^{d/2} / Gamma(d/2) the area of the unit sphere in R^d.
// The integrand is handled in the log domain and shifted by its grid maximum
// before exponentiation; each axis is integrated by adaptive Gauss-Kronrod.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spinglass/montecarlo.hpp"

namespace spinglass {

/// log of the surface area of the unit sphere in R^d.
inline double log_sphere_area(double d) {
  return std::log(2.0) + 0.5 * d * std::log(std::numbers::pi) - std::lgamma(0.5 * d);
}

/// log density of R_s = <sigma, sigma0>/N_s for sigma uniform on S(N_s).
inline double log_overlap_density(int n, double r) {
  const double log_norm = log_sphere_area(n - 1.0) - log_sphere_area(n);
  if (n == 3) return log_norm;  // exponent (n-3)/2 vanishes
  return log_norm + 0.5 * (n - 3) * std::log1p(-r * r);
}

struct SecondMomentResult {
  double value = 0.0;            // (1/N) log E Z^2
  double log_integral = 0.0;     // log of the overlap integral
  double error_estimate = 0.0;   // quadrature error bound propagated to `value`
  bool converged = true;
};

struct SecondMomentOptions {
  double rel_tol = 1e-11;
  unsigned max_depth = 20;
  int shift_grid = 101;  // cell centres; odd, so r = 0 is one of them
};

inline SecondMomentResult log_E_Z2_exact(const FiniteModel& fm, double beta, const SecondMomentOptions& opt = {}) {
  const std::size_t S = fm.num_species();
  if (S > 3) throw std::invalid_argument("log_E_Z2_exact supports at most 3 species");
  const double nb2 = fm.N * beta * beta;
  const Mixture& mix = fm.spec.mixture();

  SpeciesVector r(static_cast<Eigen::Index>(S));
  auto log_integrand = [&](const SpeciesVector& x) {
    double v = nb2 * eval(mix, x);
    for (std::size_t s = 0; s < S; ++s) v += log_overlap_density(fm.block_sizes[s], x[static_cast<Eigen::Index>(s)]);
    return v;
  };

  // Shift: maximum of the log integrand over an interior grid.
  double shift = -std::numeric_limits<double>::infinity();
  {
    const int n = opt.shift_grid;
    std::vector<int> idx(S, 0);
    while (true) {
      for (std::size_t s = 0; s < S; ++s)
        r[static_cast<Eigen::Index>(s)] = -1.0 + 2.0 * (idx[s] + 0.5) / n;
      shift = std::max(shift, log_integrand(r));
      std::size_t s = 0;
      while (s < S && ++idx[s] == n) idx[s++] = 0;
      if (s == S) break;
    }
  }

  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  SecondMomentResult out;
  double abs_err = 0.0;

  // Nested integral over axes axis, axis+1, ...; earlier axes fixed in r.
  std::function<double(std::size_t)> integrate_axis = [&](std::size_t axis) -> double {
    auto f = [&](double t) {
      r[static_cast<Eigen::Index>(axis)] = t;
      if (axis + 1 == S) return std::exp(log_integrand(r) - shift);
      return integrate_axis(axis + 1);
    };
    double total = 0.0;
    for (auto [a, b] : {std::pair{-1.0, 0.0}, std::pair{0.0, 1.0}}) {
      double err = 0.0;
      double l1 = 0.0;
      const double v = Rule::integrate(f, a, b, opt.max_depth, opt.rel_tol, &err, &l1);
      if (axis == 0) {
        abs_err += err;
        if (!(err <= 1e3 * opt.rel_tol * std::max(l1, 1e-300))) out.converged = false;
      }
      total += v;
    }
    return total;
  };

  const double integral = integrate_axis(0);
  out.log_integral = shift + std::log(integral);
  out.value = beta * beta * eval(mix, 1.0) + out.log_integral / fm.N;
  out.error_estimate = abs_err / integral / fm.N;
  if (!std::isfinite(out.value)) out.converged = false;
  return out;
}

}  // namespace spinglass
