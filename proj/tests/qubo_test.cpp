#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "qwdn/fixtures.hpp"
#include "qwdn/qubo.hpp"

using namespace qwdn;

namespace {

Bits bits_of(std::uint64_t v, int n) {
  Bits b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] = (v >> i) & 1U;
  return b;
}

struct Brute {
  double energy = std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> argmin;
};

template <typename F>
Brute brute_force(int n, F&& energy) {
  Brute out;
  for (std::uint64_t v = 0; v < (std::uint64_t{1} << n); ++v) {
    const double e = energy(bits_of(v, n));
    if (e < out.energy - 1e-9) {
      out.energy = e;
      out.argmin = {v};
    } else if (std::abs(e - out.energy) <= 1e-9) {
      out.argmin.push_back(v);
    }
  }
  return out;
}

BinaryPolynomial random_polynomial(std::mt19937_64& rng, int n_vars, int n_terms, int max_degree) {
  std::uniform_real_distribution<double> coef(-5.0, 5.0);
  BinaryPolynomial p(coef(rng));
  for (int t = 0; t < n_terms; ++t) {
    const int deg = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_degree));
    std::vector<int> m;
    for (int k = 0; k < deg; ++k) m.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(n_vars)));
    p.add_term(m, std::round(coef(rng) * 4.0) / 4.0);
  }
  return p;
}

// Checks min over auxiliaries of the quadratic model equals the polynomial
// for every assignment of the original variables, attained only at the
// consistent auxiliary assignment. Returns false if the instance is too big.
void expect_sound(const BinaryPolynomial& p, int n, const PenaltyRule& rule) {
  const auto q = quadratize(p, rule, n);
  ASSERT_LE(q.model.variable_count(), 20);
  ASSERT_EQ(q.original_count, n);
  const int a = q.aux_count;
  for (std::uint64_t x = 0; x < (std::uint64_t{1} << n); ++x) {
    const Bits orig = bits_of(x, n);
    const double target = p.evaluate(orig);
    const Bits consistent = q.extend(orig);
    EXPECT_NEAR(q.model.energy(consistent), target, 1e-9 * std::max(1.0, std::abs(target)));
    for (std::uint64_t y = 0; y < (std::uint64_t{1} << a); ++y) {
      Bits full = orig;
      for (int k = 0; k < a; ++k) full.push_back((y >> k) & 1U);
      if (full == consistent) continue;
      EXPECT_GT(q.model.energy(full), target + 1e-9) << "x=" << x << " y=" << y;
    }
  }
  // Global minima and their projections coincide.
  const auto bp = brute_force(n, [&](const Bits& b) { return p.evaluate(b); });
  const auto bq = brute_force(n + a, [&](const Bits& b) { return q.model.energy(b); });
  EXPECT_NEAR(bp.energy, bq.energy, 1e-9 * std::max(1.0, std::abs(bp.energy)));
  std::vector<std::uint64_t> projected;
  for (auto v : bq.argmin) projected.push_back(v & ((std::uint64_t{1} << n) - 1));
  std::sort(projected.begin(), projected.end());
  projected.erase(std::unique(projected.begin(), projected.end()), projected.end());
  EXPECT_EQ(projected, bp.argmin);
}

LinearSystem system_of(Eigen::MatrixXd m, Eigen::VectorXd b) {
  LinearSystem s;
  s.matrix = std::move(m);
  s.rhs = std::move(b);
  return s;
}

}  // namespace

TEST(Encoding, UnsignedAndSignedDecode) {
  FixedPointEncoding enc({{1.0, 0.5, 3, false}, {0.0, 0.25, 2, true}});
  EXPECT_EQ(enc.end_bit(), 6);
  EXPECT_EQ(enc.first_bit(1), 3);
  EXPECT_EQ(enc.sign_bit(1), 5);
  EXPECT_DOUBLE_EQ(enc.decode(0, Bits{1, 0, 1, 0, 0, 0}), 1.0 + 0.5 * 5);
  EXPECT_DOUBLE_EQ(enc.decode(1, Bits{0, 0, 0, 1, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(enc.decode(1, Bits{0, 0, 0, 1, 1, 0}), -0.75);
}

TEST(Encoding, EncodeRoundTripsLatticePoints) {
  FixedPointEncoding enc({{-2.0, 0.125, 5, false}, {0.0, 0.5, 4, true}}, 3);
  Bits b(static_cast<std::size_t>(enc.end_bit()), 0);
  for (int k = 0; k < 32; ++k) {
    enc.encode(0, -2.0 + 0.125 * k, b);
    EXPECT_DOUBLE_EQ(enc.decode(0, b), -2.0 + 0.125 * k);
  }
  for (int k = -15; k <= 15; ++k) {
    enc.encode(1, 0.5 * k, b);
    EXPECT_DOUBLE_EQ(enc.decode(1, b), 0.5 * k);
  }
  enc.encode(0, 100.0, b);
  EXPECT_DOUBLE_EQ(enc.decode(0, b), -2.0 + 0.125 * 31);
}

TEST(Polynomial, IdempotenceAndCancellation) {
  auto x = BinaryPolynomial::variable(0);
  const auto sq = x.squared();
  EXPECT_EQ(sq.degree(), 1);
  EXPECT_EQ(sq.terms().size(), 1u);
  const auto zero = x - x;
  EXPECT_TRUE(zero.terms().empty());
  BinaryPolynomial p;
  p.add_term({2, 1, 2}, 3.0);
  ASSERT_EQ(p.terms().size(), 1u);
  EXPECT_EQ(p.terms().begin()->first, (std::vector<int>{1, 2}));
}

TEST(Polynomial, ProductEvaluatesPointwise) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_polynomial(rng, 6, 5, 3), b = random_polynomial(rng, 6, 5, 3);
    const auto ab = a * b;
    for (std::uint64_t v = 0; v < 64; ++v) {
      const auto bits = bits_of(v, 6);
      EXPECT_NEAR(ab.evaluate(bits), a.evaluate(bits) * b.evaluate(bits), 1e-9);
      EXPECT_NEAR((a + b).evaluate(bits), a.evaluate(bits) + b.evaluate(bits), 1e-12);
    }
  }
}

TEST(Polynomial, ValuePolynomialMatchesDecode) {
  FixedPointEncoding enc({{0.5, 0.25, 3, false}, {0.0, 0.5, 2, true}});
  for (std::uint64_t v = 0; v < 64; ++v) {
    const auto bits = bits_of(v, 6);
    EXPECT_NEAR(value_polynomial(enc, 0).evaluate(bits), enc.decode(0, bits), 1e-15);
    EXPECT_NEAR(value_polynomial(enc, 1).evaluate(bits), enc.decode(1, bits), 1e-15);
  }
}

TEST(LinearQubo, TwoXEqualsThree) {
  const auto q = linear_system_to_qubo(system_of(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 3.0)),
                                       FixedPointEncoding({{0.0, 0.5, 3, false}}));
  const auto best = brute_force(3, [&](const Bits& b) { return q.model.energy(b); });
  ASSERT_EQ(best.argmin.size(), 1u);
  EXPECT_NEAR(best.energy, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(q.decoder.decode(0, bits_of(best.argmin[0], 3)), 1.5);
}

TEST(LinearQubo, EnergyEqualsSquaredResidual) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) m.data()[i] = g(rng);
  const Eigen::Vector3d b(g(rng), g(rng), g(rng));
  FixedPointEncoding enc({{-1.0, 0.1, 4, false}, {0.5, 0.2, 3, false}, {-0.3, 0.05, 5, false}});
  const auto q = linear_system_to_qubo(system_of(m, b), enc);
  for (std::uint64_t v = 0; v < (1u << 12); v += 7) {
    const auto bits = bits_of(v, 12);
    const Eigen::VectorXd x = enc.decode(bits);
    EXPECT_NEAR(q.model.energy(bits), (m * x - b).squaredNorm(), 1e-9);
  }
  EXPECT_THROW(linear_system_to_qubo(system_of(m, b), FixedPointEncoding({{0, 1, 2, true}, {0, 1, 2, false}, {0, 1, 2, false}})), Error);
}

TEST(Quadratize, CubicNeedsOneAuxiliary) {
  BinaryPolynomial p;
  p.add_term({0, 1, 2}, 1.0);
  const auto q = quadratize(p);
  EXPECT_EQ(q.aux_count, 1);
  EXPECT_EQ(q.model.variable_count(), 4);
  EXPECT_EQ(q.aux_pairs[0], (std::pair<int, int>{0, 1}));
  expect_sound(p, 3, {});
}

TEST(Quadratize, DegreeSixMonomial) {
  BinaryPolynomial p;
  p.add_term({0, 1, 2, 3, 4, 5}, -2.5);
  const auto q = quadratize(p);
  EXPECT_EQ(q.aux_count, 4);
  expect_sound(p, 6, {});
  expect_sound(p, 6, PenaltyRule{PenaltyRule::Scope::per_substitution});
}

TEST(Quadratize, QuadraticInputUnchanged) {
  BinaryPolynomial p(1.5);
  p.add_term({0, 1}, -2.0);
  p.add_term({1}, 0.5);
  const auto q = quadratize(p);
  EXPECT_EQ(q.aux_count, 0);
  for (std::uint64_t v = 0; v < 4; ++v) EXPECT_DOUBLE_EQ(q.model.energy(bits_of(v, 2)), p.evaluate(bits_of(v, 2)));
}

TEST(Quadratize, PenaltyIsRuleWeight) {
  BinaryPolynomial p;
  p.add_term({0, 1, 2}, 3.0);
  p.add_term({0}, -1.0);
  const auto q = quadratize(p);
  EXPECT_DOUBLE_EQ(q.penalty, 2.0 * (p.coefficient_l1() + 1.0));
  const auto local = quadratize(p, PenaltyRule{PenaltyRule::Scope::per_substitution});
  EXPECT_DOUBLE_EQ(local.penalty, 2.0 * (3.0 + 1.0));
}

// Brute-force equivalence on a corpus of random polynomials with up to 10
// original variables, under both penalty scopes.
TEST(Quadratize, SoundOnRandomCorpus) {
  std::mt19937_64 rng(12);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + trial % 8;
    const auto p = random_polynomial(rng, n, 2 + trial % 6, 2 + trial % 5);
    const auto probe = quadratize(p, {}, n);
    if (probe.model.variable_count() > 18) continue;
    expect_sound(p, n, {});
    expect_sound(p, n, PenaltyRule{PenaltyRule::Scope::per_substitution});
    ++checked;
  }
  EXPECT_GE(checked, 40);
}

TEST(Anneal, DeterministicAndSorted) {
  std::mt19937_64 rng(21);
  const auto p = random_polynomial(rng, 10, 30, 2);
  const auto model = QuboModel::from_polynomial(p, 10);
  AnnealOptions o;
  o.seed = 4;
  o.n_reads = 20;
  o.sweeps = 100;
  const auto a = anneal(model, o), b = anneal(model, o);
  ASSERT_EQ(a.samples.size(), 20u);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].bits, b.samples[i].bits);
    EXPECT_EQ(a.samples[i].energy, b.samples[i].energy);
    EXPECT_EQ(a.samples[i].energy, model.energy(a.samples[i].bits));
    if (i) EXPECT_LE(a.samples[i - 1].energy, a.samples[i].energy);
  }
  std::ostringstream s1, s2;
  write_samples(s1, a);
  write_samples(s2, b);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_EQ(s1.str().rfind("bits,energy\n", 0), 0u);
  o.seed = 5;
  std::ostringstream s3;
  write_samples(s3, anneal(model, o));
  EXPECT_NE(s1.str(), s3.str());
}

TEST(Anneal, BetaRangeFromCoefficients) {
  QuboModel m(3);
  m.add_linear(0, 4.0);
  m.add_linear(1, -1.0);
  m.add_quadratic(0, 1, 2.0);
  m.add_quadratic(1, 2, -0.5);
  const auto [b0, b1] = default_beta_range(m);
  EXPECT_DOUBLE_EQ(b0, 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(b1, 10.0 / 0.5);
}

TEST(Anneal, FindsGroundStatesOfRandomTwelveVariableQubos) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  int hits = 0, runs = 0;
  for (int inst = 0; inst < 10; ++inst) {
    QuboModel m(12);
    for (int i = 0; i < 12; ++i) {
      m.add_linear(i, coef(rng));
      for (int j = i + 1; j < 12; ++j) m.add_quadratic(i, j, coef(rng));
    }
    const auto ground = brute_force(12, [&](const Bits& b) { return m.energy(b); });
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      AnnealOptions o;
      o.seed = seed;
      const auto s = anneal(m, o);
      ++runs;
      if (s.best().energy <= ground.energy + 1e-9) ++hits;
    }
  }
  EXPECT_GE(static_cast<double>(hits) / runs, 0.9);
}

TEST(Refine, IdentityWithUnitRhs) {
  const auto sys = system_of(Eigen::MatrixXd::Identity(4, 4), Eigen::Vector4d(1, 0, 0, 0));
  const auto r = refine_solve(sys);
  EXPECT_LT((r.solution - sys.rhs).cwiseAbs().maxCoeff(), 0.02);
  for (std::size_t i = 1; i < r.rounds.size(); ++i) EXPECT_LE(r.rounds[i].best_energy, r.rounds[i - 1].best_energy);
}

TEST(Refine, SingleRoundIsOneAnneal) {
  const auto sys = system_of(Eigen::MatrixXd{{3, 1}, {1, 2}}, Eigen::Vector2d(1.0, -0.5));
  RefineOptions o;
  o.rounds = 1;
  o.bits = 6;
  o.seed = 9;
  const auto r = refine_solve(sys, o);
  const auto enc = initial_refine_encoding(sys, o.bits);
  AnnealOptions ao;
  ao.n_reads = o.n_reads;
  ao.sweeps = o.sweeps;
  ao.seed = mix_seed(o.seed, 0);
  const auto s = anneal(linear_system_to_qubo(sys, enc).model, ao);
  EXPECT_EQ(r.solution, enc.decode(s.best().bits));
}

TEST(Refine, BackendSolvesWellConditionedSystem) {
  const auto sys = system_of(Eigen::MatrixXd{{4, 1, 0}, {1, 3, 1}, {0, 1, 2}}, Eigen::Vector3d(1, 2, 3));
  QuboBackend b;
  const auto r = b(sys, SolveContext{0, 1});
  const Eigen::VectorXd exact = sys.matrix.ldlt().solve(sys.rhs);
  EXPECT_LT((r.solution - exact).norm(), 0.01 * exact.norm());
  EXPECT_TRUE(std::any_of(r.diagnostics.begin(), r.diagnostics.end(), [](const auto& d) { return d.first == "relative_residual"; }));
}
