#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spinglass/mixture.hpp"
#include "spinglass/model.hpp"

using namespace spinglass;

namespace {

Mixture sk_mixture() { return Mixture(1, {{MultiIndex({2}), 1.0}}); }

Mixture two_species_full_quadratic() {
  return Mixture(2, {{MultiIndex({2, 0}), 1.0}, {MultiIndex({0, 2}), 1.0}, {MultiIndex({1, 1}), 1.0}});
}

SpeciesVector vec(std::initializer_list<double> v) {
  SpeciesVector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

}  // namespace

TEST(SpeciesSet, RejectsBadProportions) {
  EXPECT_THROW(SpeciesSet({"a", "b"}, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(SpeciesSet({"a", "b"}, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(SpeciesSet({"a", "a"}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(SpeciesSet({"a"}, {0.9}), std::invalid_argument);
  EXPECT_NO_THROW(SpeciesSet({"a", "b"}, {0.3, 0.7}));
}

TEST(MixtureTest, RejectsLowDegreeAndNegativeCoefficients) {
  EXPECT_THROW(Mixture(1, {{MultiIndex({1}), 1.0}}), std::invalid_argument);
  EXPECT_THROW(Mixture(1, {{MultiIndex({2}), -1.0}}), std::invalid_argument);
  EXPECT_THROW(Mixture(2, {{MultiIndex({2}), 1.0}}), std::invalid_argument);
  EXPECT_NO_THROW(Mixture(1, {{MultiIndex({1}), 1.0}}, 1));
}

TEST(MixtureTest, EvalExamples) {
  EXPECT_EQ(eval(sk_mixture(), 1.0), 1.0);
  EXPECT_EQ(eval(two_species_full_quadratic(), 0.0), 0.0);
  const Mixture bip(2, {{MultiIndex({1, 1}), 2.0}});
  EXPECT_DOUBLE_EQ(eval(bip, vec({0.5, 0.25})), 0.25);
}

TEST(MixtureTest, GradExamples) {
  EXPECT_EQ(grad(sk_mixture(), vec({0.0}))[0], 0.0);
  const Mixture cubic(1, {{MultiIndex({3}), 1.0}});
  EXPECT_DOUBLE_EQ(grad(cubic, vec({0.5}))[0], 0.75);
}

TEST(MixtureTest, HessianExamples) {
  EXPECT_EQ(hessian(sk_mixture(), vec({0.0}))(0, 0), 2.0);
  for (int p : {3, 4, 5}) {
    const Mixture pure(1, {{MultiIndex({p}), 1.0}});
    EXPECT_EQ(hessian(pure, vec({0.0}))(0, 0), 0.0);
  }
}

TEST(MixtureTest, ZeroToTheZeroConvention) {
  // d/dx of x*y at (0, 0.7) is 0.7: the factor x^0 is 1.
  const Mixture bip(2, {{MultiIndex({1, 1}), 1.0}});
  const auto g = grad(bip, vec({0.0, 0.7}));
  EXPECT_DOUBLE_EQ(g[0], 0.7);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  EXPECT_DOUBLE_EQ(hessian(bip, vec({0.0, 0.0}))(0, 1), 1.0);
}

TEST(MixtureTest, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t S = 1 + trial % 3;
    const Mixture m = oracle::random_mixture(rng, S, 2, 4, 5);
    const auto x = oracle::random_point(rng, S, 0.05, 0.95);
    auto f = [&](const oracle::Vec& y) { return oracle::xi_direct(m, y); };

    const auto g = grad(m, x);
    const auto gfd = oracle::fd_gradient(f, x);
    for (Eigen::Index s = 0; s < g.size(); ++s) EXPECT_LE(oracle::rel_err(g[s], gfd[s], 1e-2), 1e-6);

    const auto H = hessian(m, x);
    const auto Hfd = oracle::fd_hessian(f, x);
    const double scale = std::max(1e-2, Hfd.cwiseAbs().maxCoeff());
    EXPECT_LE((H - Hfd).cwiseAbs().maxCoeff() / scale, 1e-6) << "trial " << trial;
    EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(MixtureTest, NonnegativeOnUnitBox) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t S = 1 + trial % 3;
    const Mixture m = oracle::random_mixture(rng, S, 2, 5, 4);
    const auto x = oracle::random_point(rng, S, 0.0, 1.0);
    EXPECT_GE(eval(m, x), 0.0);
    EXPECT_GE(grad(m, x).minCoeff(), 0.0);
    EXPECT_GE(hessian(m, x).minCoeff(), 0.0);
  }
}

TEST(TildeTransform, ZeroShiftIsIdentity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Mixture m = oracle::random_mixture(rng, 2, 2, 4, 5);
    const Mixture t = tilde_transform(m, SpeciesVector::Zero(2));
    EXPECT_EQ(t.terms(), m.terms());
    EXPECT_EQ(t.min_degree(), 1);
  }
}

TEST(TildeTransform, EvaluationAtOne) {
  std::mt19937_64 rng(4);
  const Mixture m = oracle::random_mixture(rng, 2, 2, 4, 6);
  const auto r = vec({0.3, 0.6});
  const SpeciesVector r2 = r.cwiseProduct(r);
  EXPECT_NEAR(eval(tilde_transform(m, r), 1.0), eval(m, 1.0) - eval(m, r2), 1e-12);
}

TEST(TildeTransform, MatchesDirectSubstitution) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const Mixture m = oracle::random_mixture(rng, 2, 2, 3, 5);
    const auto r = oracle::random_point(rng, 2, 0.0, 0.95);
    const Mixture t = tilde_transform(m, r);
    const SpeciesVector r2 = r.cwiseProduct(r);
    for (int k = 0; k < 100; ++k) {
      const auto x = oracle::random_point(rng, 2, -1.0, 1.0);
      const SpeciesVector shifted = (SpeciesVector::Ones(2) - r2).cwiseProduct(x) + r2;
      const double direct = oracle::xi_direct(m, shifted) - oracle::xi_direct(m, r2);
      EXPECT_NEAR(eval(t, x), direct, 1e-12);
    }
  }
}

TEST(TildeTransform, RejectsOutOfRangeShift) {
  EXPECT_THROW(tilde_transform(sk_mixture(), vec({1.0})), std::domain_error);
  EXPECT_THROW(tilde_transform(sk_mixture(), vec({-0.1})), std::domain_error);
}

TEST(EtaDirection, VanishesAtZeroAndOne) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t S = 1 + trial % 3;
    const Mixture m = oracle::random_mixture(rng, S, 2, 4, 4);
    const auto x = oracle::random_point(rng, S, 0.0, 0.99);
    EXPECT_EQ(eta_direction(m, x, SpeciesVector::Zero(static_cast<Eigen::Index>(S))), 0.0);
    EXPECT_EQ(eta_direction(m, x, SpeciesVector::Ones(static_cast<Eigen::Index>(S))), 0.0);
  }
}

TEST(EtaDirection, MatchesDerivativeOfTransform) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Mixture m = oracle::random_mixture(rng, 2, 2, 4, 5);
    const auto x = oracle::random_point(rng, 2, 0.1, 0.9);
    const auto z = oracle::random_point(rng, 2, -0.9, 0.9);
    const double base = eval(tilde_transform(m, SpeciesVector::Zero(2)), z);
    auto slope = [&](double eps) {
      const SpeciesVector r = (eps * x).cwiseSqrt();
      return (eval(tilde_transform(m, r), z) - base) / eps;
    };
    // Richardson extrapolation of the forward slope.
    const double e = 1e-4;
    const double extrap = 2 * slope(e / 2) - slope(e);
    const double closed = eta_direction(m, x, z);
    EXPECT_LE(std::abs(extrap - closed), 1e-4 * std::max(1.0, std::abs(closed)));
  }
}

TEST(AssumptionA, Examples) {
  EXPECT_TRUE(check_assumption_a(sk_mixture()));
  EXPECT_FALSE(check_assumption_a(Mixture(2, {{MultiIndex({1, 1}), 1.0}})));
  EXPECT_TRUE(check_assumption_a(two_species_full_quadratic()));
}

TEST(AssumptionA, AgreesWithBruteForce) {
  std::mt19937_64 rng(17);
  int positives = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t S = 1 + trial % 3;
    const Mixture m = oracle::random_mixture(rng, S, 2, 4, 1 + trial % 4);
    const bool fast = check_assumption_a(m);
    positives += fast;
    EXPECT_EQ(fast, oracle::assumption_a_brute_force(m)) << "trial " << trial;
  }
  EXPECT_GT(positives, 10);
  EXPECT_LT(positives, 290);
}

TEST(DegreeTwoMatrix, IsHessianAtOrigin) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mixture m = oracle::random_mixture(rng, 3, 2, 4, 6);
    EXPECT_LE((degree_two_matrix(m) - hessian(m, SpeciesVector::Zero(3))).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(ModelFile, RoundTripAndCanonicalOrder) {
  const auto j = nlohmann::json::parse(R"({
    "species": [{"name": "b", "lambda": 0.25}, {"name": "a", "lambda": 0.75}],
    "terms": [{"degrees": {"a": 1, "b": 1}, "delta_sq": 0.5},
              {"degrees": {"b": 2}, "delta_sq": 2.0},
              {"degrees": {"a": 3}, "delta_sq": 1.0}]})");
  const ModelSpec m = model_from_json(j);
  EXPECT_EQ(m.species().name(0), "b");
  EXPECT_EQ(m.mixture().coefficient(MultiIndex({1, 1})), 0.5);
  const ModelSpec again = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(again.mixture(), m.mixture());
  EXPECT_EQ(model_hash(again), model_hash(m));
  // Canonical order: lexicographic in species order (b, a).
  std::vector<MultiIndex> order;
  for (const auto& [p, c] : m.mixture().terms()) order.push_back(p);
  EXPECT_EQ(order, (std::vector<MultiIndex>{MultiIndex({0, 3}), MultiIndex({1, 1}), MultiIndex({2, 0})}));
}

TEST(ModelFile, DiagnosticsNameTheField) {
  auto message = [](const char* text) {
    try {
      model_from_json(nlohmann::json::parse(text));
    } catch (const ModelFormatError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"species": [{"name": "s"}], "terms": []})").find("lambda"), std::string::npos);
  EXPECT_NE(message(R"({"species": [{"name": "s", "lambda": 1}]})").find("terms"), std::string::npos);
  EXPECT_NE(message(R"({"species": [{"name": "s", "lambda": 1}],
                        "terms": [{"degrees": {"t": 2}, "delta_sq": 1}]})").find("unknown species"),
            std::string::npos);
  EXPECT_NE(message(R"({"species": [{"name": "s", "lambda": 1}],
                        "terms": [{"degrees": {"s": 2}}]})").find("delta_sq"),
            std::string::npos);
}
