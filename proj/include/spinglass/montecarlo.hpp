#pragma once

// Finite-N realization of the multi-species spherical model: block partition,
// Gaussian disorder, Hamiltonian evaluation, the exact covariance identity,
// sphere and band sampling, and plain Monte Carlo estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spinglass/landscape.hpp"
#include "spinglass/mixture.hpp"
#include "spinglass/model.hpp"
#include "spinglass/philox.hpp"

namespace spinglass {

struct FiniteModel {
  ModelSpec spec;
  int N = 0;
  std::vector<int> block_sizes;    // N_s
  std::vector<int> block_offsets;  // first index of I_s
  std::vector<int> species_of;     // species of each coordinate

  std::size_t num_species() const { return block_sizes.size(); }
};

/// Splits N coordinates into species blocks by largest-remainder rounding of
/// lambda(s) N (ties to the earlier species), then lifts every block to >= 3.
inline FiniteModel build_finite_model(const ModelSpec& spec, int N) {
  const std::size_t S = spec.num_species();
  if (N < 3 * static_cast<int>(S))
    throw std::invalid_argument("N = " + std::to_string(N) + " is below 3 per species");
  std::vector<int> sizes(S);
  std::vector<double> rem(S);
  int assigned = 0;
  for (std::size_t s = 0; s < S; ++s) {
    const double exact = spec.species().lambda(s) * N;
    sizes[s] = static_cast<int>(std::floor(exact));
    rem[s] = exact - sizes[s];
    assigned += sizes[s];
  }
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (int k = 0; k < N - assigned; ++k) ++sizes[order[static_cast<std::size_t>(k) % S]];

  for (std::size_t s = 0; s < S; ++s) {
    while (sizes[s] < 3) {
      std::size_t donor = 0;
      for (std::size_t t = 1; t < S; ++t)
        if (sizes[t] > sizes[donor]) donor = t;
      --sizes[donor];
      ++sizes[s];
    }
  }

  FiniteModel fm{spec, N, sizes, {}, {}};
  int offset = 0;
  for (std::size_t s = 0; s < S; ++s) {
    fm.block_offsets.push_back(offset);
    for (int i = 0; i < sizes[s]; ++i) fm.species_of.push_back(static_cast<int>(s));
    offset += sizes[s];
  }
  return fm;
}

/// A point of the product of spheres S(N_s): sum_{i in I_s} sigma_i^2 = N_s.
struct Configuration {
  std::vector<double> coords;
};

inline void validate_configuration(const FiniteModel& fm, const Configuration& sigma) {
  if (static_cast<int>(sigma.coords.size()) != fm.N)
    throw std::invalid_argument("configuration length differs from N");
  for (std::size_t s = 0; s < fm.num_species(); ++s) {
    double norm2 = 0.0;
    const int off = fm.block_offsets[s];
    for (int i = 0; i < fm.block_sizes[s]; ++i) norm2 += sigma.coords[static_cast<std::size_t>(off + i)] *
                                                         sigma.coords[static_cast<std::size_t>(off + i)];
    if (std::abs(norm2 - fm.block_sizes[s]) > 1e-9 * fm.block_sizes[s])
      throw std::invalid_argument("configuration block " + std::to_string(s) + " is off its sphere");
  }
}

inline SpeciesVector overlap(const FiniteModel& fm, const Configuration& a, const Configuration& b) {
  SpeciesVector r = SpeciesVector::Zero(static_cast<Eigen::Index>(fm.num_species()));
  for (int i = 0; i < fm.N; ++i)
    r[fm.species_of[static_cast<std::size_t>(i)]] +=
        a.coords[static_cast<std::size_t>(i)] * b.coords[static_cast<std::size_t>(i)];
  for (std::size_t s = 0; s < fm.num_species(); ++s) r[static_cast<Eigen::Index>(s)] /= fm.block_sizes[s];
  return r;
}

/// Which per-tuple variance law to use. `missing_factorial` drops the
/// multinomial factor prod p(s)! / |p|! and exists for mutation testing.
enum class CoefficientLaw { exact, missing_factorial };

/// Delta^2_{i_1..i_k} for any tuple whose species counts equal p.
inline double tuple_variance(const FiniteModel& fm, const MultiIndex& p, double delta_sq,
                             CoefficientLaw law = CoefficientLaw::exact) {
  double v = delta_sq;
  if (law == CoefficientLaw::exact) {
    double num = 1.0;
    for (std::size_t s = 0; s < p.size(); ++s) num *= std::tgamma(p[s] + 1.0);
    v *= num / std::tgamma(p.total() + 1.0);
  }
  for (std::size_t s = 0; s < p.size(); ++s) v *= std::pow(static_cast<double>(fm.block_sizes[s]), -p[s]);
  return v;
}

namespace detail {

inline std::size_t int_pow(std::size_t base, int k) {
  std::size_t r = 1;
  for (int i = 0; i < k; ++i) r *= base;
  return r;
}

/// Calls visit(flat_index, tuple) for every tuple in [N]^k whose species
/// counts equal p; the last tuple position varies fastest.
template <class Visit>
void for_each_tuple(const FiniteModel& fm, const MultiIndex& p, Visit&& visit) {
  const int k = p.total();
  const std::size_t S = fm.num_species();
  std::vector<int> tuple(static_cast<std::size_t>(k), 0);
  std::vector<int> counts(S, 0);
  counts[static_cast<std::size_t>(fm.species_of[0])] = k;
  const std::size_t total = int_pow(static_cast<std::size_t>(fm.N), k);
  for (std::size_t flat = 0; flat < total; ++flat) {
    bool match = true;
    for (std::size_t s = 0; s < S; ++s)
      if (counts[s] != p[s]) {
        match = false;
        break;
      }
    if (match) visit(flat, std::span<const int>(tuple));
    // odometer increment, updating species counts
    for (int pos = k - 1; pos >= 0; --pos) {
      auto& d = tuple[static_cast<std::size_t>(pos)];
      --counts[static_cast<std::size_t>(fm.species_of[static_cast<std::size_t>(d)])];
      if (++d < fm.N) {
        ++counts[static_cast<std::size_t>(fm.species_of[static_cast<std::size_t>(d)])];
        break;
      }
      d = 0;
      ++counts[static_cast<std::size_t>(fm.species_of[0])];
    }
  }
}

}  // namespace detail

/// Realized couplings of one mixture term: a dense N^k tensor that is zero
/// outside the tuples whose species counts equal p.
struct DisorderTerm {
  MultiIndex p;
  int order = 0;
  std::uint32_t term_id = 0;
  double scale = 0.0;  // sqrt(N) * Delta_{i_1..i_k}
  std::vector<double> couplings;
};

struct DisorderSample {
  std::uint64_t seed = 0;
  int N = 0;
  std::vector<DisorderTerm> terms;
};

inline constexpr std::size_t kDefaultTensorBudget = 100'000'000;

class TensorBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Total tensor entries sample_disorder would allocate, or throws naming the
/// first term that crosses the budget.
inline std::size_t check_tensor_budget(const FiniteModel& fm, std::size_t budget = kDefaultTensorBudget) {
  std::size_t used = 0;
  for (const auto& [p, c] : fm.spec.mixture().terms()) {
    const std::size_t n = detail::int_pow(static_cast<std::size_t>(fm.N), p.total());
    if (used + n > budget) {
      std::string label;
      for (std::size_t s = 0; s < p.size(); ++s) label += (s ? "," : "") + std::to_string(p[s]);
      throw TensorBudgetError("term p=(" + label + ") needs " + std::to_string(n) + " coupling entries; budget " +
                              std::to_string(budget) + " exceeded at N=" + std::to_string(fm.N));
    }
    used += n;
  }
  return used;
}

/// Fills every coupling J with a standard normal keyed by (seed, term, flat index).
inline DisorderSample sample_disorder(const FiniteModel& fm, std::uint64_t seed,
                                      std::size_t budget = kDefaultTensorBudget,
                                      CoefficientLaw law = CoefficientLaw::exact) {
  check_tensor_budget(fm, budget);
  DisorderSample out{seed, fm.N, {}};
  std::uint32_t term_id = 0;
  for (const auto& [p, c] : fm.spec.mixture().terms()) {
    DisorderTerm t;
    t.p = p;
    t.order = p.total();
    t.term_id = term_id++;
    t.scale = std::sqrt(static_cast<double>(fm.N) * tuple_variance(fm, p, c, law));
    t.couplings.assign(detail::int_pow(static_cast<std::size_t>(fm.N), t.order), 0.0);
    detail::for_each_tuple(fm, p, [&](std::size_t flat, std::span<const int>) {
      t.couplings[flat] = keyed_normal(seed, StreamTag::disorder, t.term_id, flat);
    });
    out.terms.push_back(std::move(t));
  }
  return out;
}

/// H_N(sigma): each term's tensor contracted against sigma^{(x)k}.
inline double evaluate_H(const DisorderSample& disorder, const Configuration& sigma) {
  const auto N = static_cast<std::size_t>(disorder.N);
  const std::span<const double> x(sigma.coords);
  double total = 0.0;
  std::vector<double> buf;
  for (const auto& t : disorder.terms) {
    // Contract the fastest index first: v[a] = sum_b T[a N + b] x[b].
    std::span<const double> cur(t.couplings);
    std::vector<double> next;
    for (int level = t.order; level > 1; --level) {
      const std::size_t outer = cur.size() / N;
      next.assign(outer, 0.0);
      for (std::size_t a = 0; a < outer; ++a) {
        const double* row = cur.data() + a * N;
        double acc = 0.0;
        for (std::size_t b = 0; b < N; ++b) acc += row[b] * x[b];
        next[a] = acc;
      }
      buf.swap(next);
      cur = std::span<const double>(buf);
    }
    double acc = 0.0;
    for (std::size_t b = 0; b < N; ++b) acc += cur[b] * x[b];
    total += t.scale * acc;
  }
  return total;
}

class CoefficientLawError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Both routes to E H(sigma) H(sigma'): the literal sum over index tuples of
/// Delta^2_{i_1..i_k} prod_j sigma_{i_j} sigma'_{i_j}, and N xi(R(sigma, sigma')).
struct CovarianceRoutes {
  double tuple_sum = 0.0;
  double closed_form = 0.0;
  double rel_err = 0.0;  // |difference| / max(|closed_form|, 1e-6 N xi(1))
};

inline CovarianceRoutes covariance_routes(const FiniteModel& fm, const Configuration& a, const Configuration& b,
                                          CoefficientLaw law = CoefficientLaw::exact) {
  std::vector<double> u(static_cast<std::size_t>(fm.N));
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = a.coords[i] * b.coords[i];
  CovarianceRoutes out;
  for (const auto& [p, c] : fm.spec.mixture().terms()) {
    const double var = tuple_variance(fm, p, c, law);
    double sum = 0.0;
    detail::for_each_tuple(fm, p, [&](std::size_t, std::span<const int> tuple) {
      double prod = 1.0;
      for (int i : tuple) prod *= u[static_cast<std::size_t>(i)];
      sum += prod;
    });
    out.tuple_sum += var * sum;
  }
  out.tuple_sum *= fm.N;
  out.closed_form = fm.N * eval(fm.spec.mixture(), overlap(fm, a, b));
  const double floor = 1e-6 * fm.N * fm.spec.xi_one();
  out.rel_err = std::abs(out.tuple_sum - out.closed_form) / std::max(std::abs(out.closed_form), floor);
  return out;
}

/// Returns the tuple-sum covariance after checking it against N xi(R) to 1e-10.
inline double covariance_exact(const FiniteModel& fm, const Configuration& a, const Configuration& b,
                               CoefficientLaw law = CoefficientLaw::exact) {
  validate_configuration(fm, a);
  validate_configuration(fm, b);
  const auto routes = covariance_routes(fm, a, b, law);
  if (!(routes.rel_err <= 1e-10))
    throw CoefficientLawError("coefficient law mismatch: tuple sum " + std::to_string(routes.tuple_sum) +
                              " vs N xi(R) " + std::to_string(routes.closed_form));
  return routes.tuple_sum;
}

namespace detail {

inline void normalize_block(std::span<double> block, double radius) {
  double n2 = 0.0;
  for (double v : block) n2 += v * v;
  const double scale = radius / std::sqrt(n2);
  for (double& v : block) v *= scale;
}

}  // namespace detail

/// Uniform point on prod_s S(N_s): normalized Gaussian blocks.
inline Configuration sample_uniform(const FiniteModel& fm, PhiloxStream& rng) {
  Configuration c{std::vector<double>(static_cast<std::size_t>(fm.N))};
  for (std::size_t s = 0; s < fm.num_species(); ++s) {
    std::span<double> block(c.coords.data() + fm.block_offsets[s], static_cast<std::size_t>(fm.block_sizes[s]));
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& v : block) {
        v = rng.normal();
        n2 += v * v;
      }
    } while (!(n2 > 1e-300));
    detail::normalize_block(block, std::sqrt(static_cast<double>(fm.block_sizes[s])));
  }
  return c;
}

/// Uniform point of the band {sigma : R_s(center, sigma) = r(s) for all s}:
/// r(s) center + sqrt(1 - r(s)^2) times a uniform direction orthogonal to the
/// center within each block, at radius sqrt(N_s).
inline Configuration sample_on_band(const FiniteModel& fm, const Configuration& center, const SpeciesVector& r,
                                    PhiloxStream& rng) {
  if (static_cast<std::size_t>(r.size()) != fm.num_species())
    throw std::invalid_argument("band overlap length does not match species count");
  for (Eigen::Index s = 0; s < r.size(); ++s)
    if (!(r[s] >= 0.0 && r[s] < 1.0)) throw std::domain_error("band overlap must lie in [0,1)");

  Configuration out{std::vector<double>(static_cast<std::size_t>(fm.N))};
  for (std::size_t s = 0; s < fm.num_species(); ++s) {
    const auto off = static_cast<std::size_t>(fm.block_offsets[s]);
    const auto ns = static_cast<std::size_t>(fm.block_sizes[s]);
    std::span<const double> c(center.coords.data() + off, ns);
    std::span<double> u(out.coords.data() + off, ns);
    double n2 = 0.0;
    do {
      for (double& v : u) v = rng.normal();
      // Two Gram-Schmidt passes against the center direction.
      for (int pass = 0; pass < 2; ++pass) {
        double dot = 0.0;
        for (std::size_t i = 0; i < ns; ++i) dot += u[i] * c[i];
        dot /= static_cast<double>(ns);
        for (std::size_t i = 0; i < ns; ++i) u[i] -= dot * c[i];
      }
      n2 = 0.0;
      for (double v : u) n2 += v * v;
    } while (!(n2 > 1e-300));
    detail::normalize_block(u, std::sqrt(static_cast<double>(ns)));
    const double rs = r[static_cast<Eigen::Index>(s)];
    const double perp = std::sqrt(1.0 - rs * rs);
    for (std::size_t i = 0; i < ns; ++i) u[i] = rs * c[i] + perp * u[i];
  }
  return out;
}

struct EstimatorResult {
  double estimate = 0.0;
  double std_error = 0.0;
  long n_samples = 0;
  std::uint64_t seed = 0;
  double prediction = std::numeric_limits<double>::quiet_NaN();  // asymptotic target
  double residual = std::numeric_limits<double>::quiet_NaN();    // estimate - prediction
  double effective_sample_size = std::numeric_limits<double>::quiet_NaN();
  long hits = -1;  // level-set estimator only
  std::vector<std::string> warnings;
};

namespace detail {

/// Fixed-order pairwise summation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// out[i] = fn(i) for i < n, split across `workers` threads in contiguous
/// chunks. Each entry depends only on i, so the result is schedule-free.
inline std::vector<double> map_samples(long n, unsigned workers, const std::function<double(long)>& fn) {
  std::vector<double> out(static_cast<std::size_t>(n));
  if (workers <= 1 || n < 1024) {
    for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  const long chunk = (n + static_cast<long>(workers) - 1) / static_cast<long>(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const long lo = static_cast<long>(w) * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      for (long i = lo; i < hi; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

/// (1/N) log mean exp(x) with a delta-method standard error.
inline EstimatorResult log_mean_exp(std::span<const double> x, int N) {
  EstimatorResult r;
  r.n_samples = static_cast<long>(x.size());
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) w[i] = std::exp(x[i] - m);
  const double n = static_cast<double>(x.size());
  const double mean = pairwise_sum(w) / n;
  std::vector<double> dev(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) dev[i] = (w[i] - mean) * (w[i] - mean);
  const double var = pairwise_sum(dev) / (n - 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) dev[i] = w[i] * w[i];
  r.effective_sample_size = (mean * n) * (mean * n) / pairwise_sum(dev);
  r.estimate = (m + std::log(mean)) / N;
  r.std_error = std::sqrt(var / n) / mean / N;
  if (r.effective_sample_size < 10.0)
    r.warnings.push_back("effective sample size " + std::to_string(r.effective_sample_size) + " below 10");
  return r;
}

}  // namespace detail

struct EstimatorOptions {
  long n_samples = 10'000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// Plain Monte Carlo estimate of F = (1/N) log Z, Z = E_mu exp(beta H).
inline EstimatorResult estimate_free_energy(const FiniteModel& fm, const DisorderSample& disorder, double beta,
                                            const EstimatorOptions& opt) {
  if (opt.n_samples < 100) throw std::invalid_argument("free-energy estimator needs at least 100 samples");
  const auto x = detail::map_samples(opt.n_samples, opt.workers, [&](long i) {
    PhiloxStream rng(opt.seed, StreamTag::uniform_config, static_cast<std::uint64_t>(i));
    return beta * evaluate_H(disorder, sample_uniform(fm, rng));
  });
  auto r = detail::log_mean_exp(x, fm.N);
  r.seed = opt.seed;
  r.prediction = 0.5 * beta * beta * fm.spec.xi_one();
  r.residual = r.estimate - r.prediction;
  return r;
}

/// (1/N) log mu{ sigma : |H(sigma)/N - beta xi(1)| < epsilon } by hit counting.
inline EstimatorResult estimate_level_set(const FiniteModel& fm, const DisorderSample& disorder, double beta,
                                          double epsilon, const EstimatorOptions& opt) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("level-set width must be positive");
  if (opt.n_samples < 1) throw std::invalid_argument("level-set estimator needs samples");
  const double target = beta * fm.spec.xi_one();
  const auto inside = detail::map_samples(opt.n_samples, opt.workers, [&](long i) {
    PhiloxStream rng(opt.seed, StreamTag::uniform_config, static_cast<std::uint64_t>(i));
    const double h = evaluate_H(disorder, sample_uniform(fm, rng)) / fm.N;
    return std::abs(h - target) < epsilon ? 1.0 : 0.0;
  });
  EstimatorResult r;
  r.seed = opt.seed;
  r.n_samples = opt.n_samples;
  r.hits = static_cast<long>(detail::pairwise_sum(inside));
  r.prediction = -0.5 * beta * beta * fm.spec.xi_one();
  if (r.hits == 0) {
    r.estimate = -std::numeric_limits<double>::infinity();
    r.std_error = std::numeric_limits<double>::infinity();
    r.warnings.push_back("no samples landed in the level set");
  } else {
    const double phat = static_cast<double>(r.hits) / static_cast<double>(r.n_samples);
    r.estimate = std::log(phat) / fm.N;
    r.std_error = std::sqrt((1.0 - phat) / (static_cast<double>(r.n_samples) * phat)) / fm.N;
  }
  r.residual = r.estimate - r.prediction;
  return r;
}

/// Band free energy around `center` at overlap r, on the mu scale:
/// (1/N) log E_nu exp(beta H) plus the band's log-volume rate
/// 1/2 sum_s lambda(s) log(1 - r(s)^2). Compared against 1/2 beta^2 xi(1) + f_beta(r).
inline EstimatorResult estimate_band_free_energy(const FiniteModel& fm, const DisorderSample& disorder,
                                                 const Configuration& center, const SpeciesVector& r, double beta,
                                                 const EstimatorOptions& opt) {
  validate_configuration(fm, center);
  if (opt.n_samples < 100) throw std::invalid_argument("band estimator needs at least 100 samples");
  const auto x = detail::map_samples(opt.n_samples, opt.workers, [&](long i) {
    PhiloxStream rng(opt.seed, StreamTag::band_config, static_cast<std::uint64_t>(i));
    return beta * evaluate_H(disorder, sample_on_band(fm, center, r, rng));
  });
  auto res = detail::log_mean_exp(x, fm.N);
  res.seed = opt.seed;
  res.estimate += detail::entropy(fm.spec.lambda(), r);
  res.prediction = 0.5 * beta * beta * fm.spec.xi_one() + f_beta(fm.spec, beta, r);
  res.residual = res.estimate - res.prediction;
  return res;
}

}  // namespace spinglass
