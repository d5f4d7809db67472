#pragma once

// Multi-species mixture polynomials xi(x) = sum_p Delta_p^2 prod_s x(s)^p(s)
// and the calculus built on them.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace spinglass {

/// Values indexed by species, in the order of the owning SpeciesSet.
using SpeciesVector = Eigen::VectorXd;
using SpeciesMatrix = Eigen::MatrixXd;

/// Ordered species labels with their limiting proportions lambda(s).
class SpeciesSet {
 public:
  SpeciesSet() = default;

  SpeciesSet(std::vector<std::string> names, std::vector<double> lambda)
      : names_(std::move(names)), lambda_(std::move(lambda)) {
    if (names_.empty()) throw std::invalid_argument("species set is empty");
    if (names_.size() != lambda_.size())
      throw std::invalid_argument("species names and proportions differ in length");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j)
        if (names_[i] == names_[j])
          throw std::invalid_argument("duplicate species name '" + names_[i] + "'");
    }
    const double total = std::accumulate(lambda_.begin(), lambda_.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("species proportions must sum to 1");
    for (std::size_t i = 0; i < lambda_.size(); ++i) {
      const double l = lambda_[i];
      const bool ok = names_.size() == 1 ? l == 1.0 : (l > 0.0 && l < 1.0);
      if (!ok)
        throw std::invalid_argument("proportion of species '" + names_[i] +
                                    "' must lie in (0,1)");
    }
  }

  static SpeciesSet single(std::string name = "s") { return SpeciesSet({std::move(name)}, {1.0}); }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  double lambda(std::size_t i) const { return lambda_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  SpeciesVector lambda_vector() const {
    return Eigen::Map<const Eigen::VectorXd>(lambda_.data(), static_cast<Eigen::Index>(lambda_.size()));
  }

  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw std::invalid_argument("unknown species '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
  }

  bool operator==(const SpeciesSet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> lambda_;
};

/// Degree vector p over species. Ordered lexicographically in species order,
/// which fixes the canonical serialized order of coefficient maps.
struct MultiIndex {
  std::vector<int> degrees;

  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> d) : degrees(std::move(d)) {
    for (int v : degrees)
      if (v < 0) throw std::invalid_argument("negative degree in multi-index");
  }

  int total() const { return std::accumulate(degrees.begin(), degrees.end(), 0); }
  std::size_t size() const { return degrees.size(); }
  int operator[](std::size_t s) const { return degrees[s]; }

  /// Componentwise p <= q.
  bool dominated_by(const MultiIndex& q) const {
    for (std::size_t s = 0; s < degrees.size(); ++s)
      if (degrees[s] > q.degrees[s]) return false;
    return true;
  }

  auto operator<=>(const MultiIndex&) const = default;
  bool operator==(const MultiIndex&) const = default;
};

namespace detail {

inline double ipow(double x, int n) {
  double result = 1.0;
  double base = x;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

}  // namespace detail

/// Finite map p -> Delta_p^2 over a fixed number of species.
///
/// Base models use min_degree 2. Recentred mixtures produced by
/// tilde_transform carry degree-one terms and use min_degree 1.
class Mixture {
 public:
  using TermMap = std::map<MultiIndex, double>;

  Mixture() = default;

  Mixture(std::size_t num_species, TermMap terms, int min_degree = 2)
      : num_species_(num_species), min_degree_(min_degree), terms_(std::move(terms)) {
    if (num_species_ == 0) throw std::invalid_argument("mixture needs at least one species");
    if (min_degree_ != 1 && min_degree_ != 2)
      throw std::invalid_argument("mixture min_degree must be 1 or 2");
    for (const auto& [p, c] : terms_) {
      if (p.size() != num_species_)
        throw std::invalid_argument("multi-index length does not match species count");
      if (p.total() < min_degree_)
        throw std::invalid_argument("term of total degree " + std::to_string(p.total()) +
                                    " below min_degree " + std::to_string(min_degree_));
      if (!(c >= 0.0) || !std::isfinite(c))
        throw std::invalid_argument("mixture coefficients must be finite and nonnegative");
    }
  }

  std::size_t num_species() const { return num_species_; }
  int min_degree() const { return min_degree_; }
  const TermMap& terms() const { return terms_; }

  double coefficient(const MultiIndex& p) const {
    auto it = terms_.find(p);
    return it == terms_.end() ? 0.0 : it->second;
  }

  int max_degree() const {
    int d = 0;
    for (const auto& [p, c] : terms_) d = std::max(d, p.total());
    return d;
  }

  bool operator==(const Mixture&) const = default;

 private:
  std::size_t num_species_ = 0;
  int min_degree_ = 2;
  TermMap terms_;
};

namespace detail {

inline void check_arity(const Mixture& m, const SpeciesVector& x) {
  if (static_cast<std::size_t>(x.size()) != m.num_species())
    throw std::invalid_argument("argument length does not match species count");
}

inline double monomial(const MultiIndex& p, const SpeciesVector& x) {
  double v = 1.0;
  for (std::size_t s = 0; s < p.size(); ++s) v *= ipow(x[static_cast<Eigen::Index>(s)], p[s]);
  return v;
}

}  // namespace detail

/// xi(x). Defined for any real vector.
inline double eval(const Mixture& m, const SpeciesVector& x) {
  detail::check_arity(m, x);
  double sum = 0.0;
  for (const auto& [p, c] : m.terms()) sum += c * detail::monomial(p, x);
  return sum;
}

/// xi(a) at the constant vector x = a.
inline double eval(const Mixture& m, double a) {
  return eval(m, SpeciesVector::Constant(static_cast<Eigen::Index>(m.num_species()), a));
}

/// Gradient of xi, using 0^0 = 1 so the derivative is continuous at the origin.
inline SpeciesVector grad(const Mixture& m, const SpeciesVector& x) {
  detail::check_arity(m, x);
  const auto S = static_cast<Eigen::Index>(m.num_species());
  SpeciesVector g = SpeciesVector::Zero(S);
  for (const auto& [p, c] : m.terms()) {
    for (Eigen::Index s = 0; s < S; ++s) {
      const int ps = p[static_cast<std::size_t>(s)];
      if (ps == 0) continue;
      double v = c * ps * detail::ipow(x[s], ps - 1);
      for (Eigen::Index t = 0; t < S; ++t)
        if (t != s) v *= detail::ipow(x[t], p[static_cast<std::size_t>(t)]);
      g[s] += v;
    }
  }
  return g;
}

inline SpeciesMatrix hessian(const Mixture& m, const SpeciesVector& x) {
  detail::check_arity(m, x);
  const auto S = static_cast<Eigen::Index>(m.num_species());
  SpeciesMatrix h = SpeciesMatrix::Zero(S, S);
  for (const auto& [p, c] : m.terms()) {
    for (Eigen::Index s = 0; s < S; ++s) {
      const int ps = p[static_cast<std::size_t>(s)];
      if (ps == 0) continue;
      for (Eigen::Index t = s; t < S; ++t) {
        const int pt = p[static_cast<std::size_t>(t)];
        double v = c;
        if (t == s) {
          if (ps < 2) continue;
          v *= ps * (ps - 1) * detail::ipow(x[s], ps - 2);
        } else {
          if (pt == 0) continue;
          v *= ps * detail::ipow(x[s], ps - 1) * pt * detail::ipow(x[t], pt - 1);
        }
        for (Eigen::Index u = 0; u < S; ++u)
          if (u != s && u != t) v *= detail::ipow(x[u], p[static_cast<std::size_t>(u)]);
        h(s, t) += v;
        if (t != s) h(t, s) += v;
      }
    }
  }
  return h;
}

/// The recentred mixture xi_r(x) = xi((1 - r^2) x + r^2) - xi(r^2), returned in
/// coefficient form. Coefficients below 1e-300 are dropped.
inline Mixture tilde_transform(const Mixture& m, const SpeciesVector& r) {
  detail::check_arity(m, r);
  for (Eigen::Index s = 0; s < r.size(); ++s)
    if (!(r[s] >= 0.0 && r[s] < 1.0))
      throw std::domain_error("tilde_transform requires r in [0,1)^S");

  const std::size_t S = m.num_species();
  Mixture::TermMap out;
  std::vector<int> sub(S);
  for (const auto& [q, c] : m.terms()) {
    // Enumerate every p <= q componentwise (odometer over the box).
    std::fill(sub.begin(), sub.end(), 0);
    while (true) {
      MultiIndex p(sub);
      if (p.total() >= 1) {
        double w = c;
        for (std::size_t s = 0; s < S; ++s) {
          const double rs2 = r[static_cast<Eigen::Index>(s)] * r[static_cast<Eigen::Index>(s)];
          w *= detail::binomial(q[s], p[s]) * detail::ipow(1.0 - rs2, p[s]) *
               detail::ipow(rs2, q[s] - p[s]);
        }
        if (w != 0.0) out[p] += w;
      }
      std::size_t s = 0;
      while (s < S && sub[s] == q[s]) sub[s++] = 0;
      if (s == S) break;
      ++sub[s];
    }
  }
  std::erase_if(out, [](const auto& kv) { return kv.second < 1e-300; });
  return Mixture(S, std::move(out), 1);
}

/// d/d(eps) at eps = 0 of xi_{sqrt(eps x)}(z), in closed form.
inline double eta_direction(const Mixture& m, const SpeciesVector& x, const SpeciesVector& z) {
  detail::check_arity(m, x);
  detail::check_arity(m, z);
  const SpeciesVector gz = grad(m, z);
  const SpeciesVector g0 = grad(m, SpeciesVector::Zero(z.size()));
  double sum = 0.0;
  for (Eigen::Index s = 0; s < z.size(); ++s)
    sum += gz[s] * x[s] * (1.0 - z[s]) - g0[s] * x[s];
  return sum;
}

/// xi(x) > 0 on [0,1]^S \ {0}. With nonnegative coefficients this holds iff
/// every species carries a positive term supported on that species alone.
inline bool check_assumption_a(const Mixture& m) {
  const std::size_t S = m.num_species();
  for (std::size_t s = 0; s < S; ++s) {
    bool found = false;
    for (const auto& [p, c] : m.terms()) {
      if (c <= 0.0 || p[s] == 0) continue;
      bool pure = true;
      for (std::size_t t = 0; t < S; ++t)
        if (t != s && p[t] != 0) pure = false;
      if (pure) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

/// Degree-two coefficient matrix Q: Q(s,s) = 2 Delta^2_{2e_s}, Q(s,t) = Delta^2_{e_s+e_t}.
/// Equals the Hessian of xi at the origin.
inline SpeciesMatrix degree_two_matrix(const Mixture& m) {
  const auto S = static_cast<Eigen::Index>(m.num_species());
  SpeciesMatrix q = SpeciesMatrix::Zero(S, S);
  for (const auto& [p, c] : m.terms()) {
    if (p.total() != 2) continue;
    std::vector<Eigen::Index> support;
    for (Eigen::Index s = 0; s < S; ++s)
      for (int k = 0; k < p[static_cast<std::size_t>(s)]; ++k) support.push_back(s);
    if (support[0] == support[1]) {
      q(support[0], support[0]) += 2.0 * c;
    } else {
      q(support[0], support[1]) += c;
      q(support[1], support[0]) += c;
    }
  }
  return q;
}

}  // namespace spinglass
