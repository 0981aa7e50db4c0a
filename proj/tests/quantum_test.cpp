#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qwdn/fixtures.hpp"
#include "qwdn/hhl.hpp"
#include "qwdn/statevector.hpp"
#include "qwdn/vqls.hpp"

using namespace qwdn;

namespace {

Gate random_gate(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  const int a = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
  int b = static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
  if (b >= a) ++b;
  switch (rng() % 6) {
    case 0: return Gate::h(a);
    case 1: return Gate::x(a);
    case 2: return Gate::ry(a, angle(rng));
    case 3: return Gate::cz(a, b);
    case 4: return Gate::cnot(a, b);
    default: {
      Eigen::MatrixXcd u(2, 2);
      const double t = angle(rng), p = angle(rng);
      u << std::cos(t), -std::polar(std::sin(t), p), std::polar(std::sin(t), -p), std::cos(t);
      return Gate::controlled({b}, {a}, u);
    }
  }
}

LinearSystem system_of(Eigen::MatrixXd m, Eigen::VectorXd b) {
  LinearSystem s;
  s.matrix = std::move(m);
  s.rhs = std::move(b);
  s.condition_estimate = estimate_condition(s.matrix);
  return s;
}

}  // namespace

TEST(StateVector, NormPreservedOverRandomCircuits) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    Circuit c(n);
    for (int g = 0; g < 50; ++g) c.add(random_gate(rng, n));
    const auto out = run(c, QuantumState(n, rng() % (std::size_t{1} << n)));
    EXPECT_NEAR(out.norm(), 1.0, 1e-12);
  }
}

TEST(StateVector, BasicGateActions) {
  auto s = apply(QuantumState(2), Gate::x(0));
  EXPECT_NEAR(std::abs(s[1]), 1.0, 1e-15);
  s = apply(s, Gate::cnot(0, 1));
  EXPECT_NEAR(std::abs(s[3]), 1.0, 1e-15);
  s = apply(s, Gate::cz(0, 1));
  EXPECT_NEAR(s[3].real(), -1.0, 1e-15);
  auto h = apply(QuantumState(1), Gate::h(0));
  EXPECT_NEAR(h[0].real(), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(h[1].real(), std::sqrt(0.5), 1e-15);
  auto r = apply(QuantumState(1), Gate::ry(0, std::numbers::pi));
  EXPECT_NEAR(r[1].real(), 1.0, 1e-15);
}

TEST(StateVector, RejectsInvalidGates) {
  Circuit c(2);
  EXPECT_THROW(c.add(Gate::h(2)), Error);
  EXPECT_THROW(c.add(Gate::cnot(1, 1)), Error);
  EXPECT_THROW(c.add(Gate::unitary({0}, Eigen::MatrixXcd::Constant(2, 2, 1.0))), Error);
  EXPECT_THROW(c.add(Gate::unitary({0, 1}, Eigen::MatrixXcd::Identity(2, 2))), Error);
  EXPECT_THROW(Circuit(kMaxQubits + 1), Error);
  EXPECT_THROW(QuantumState(0), Error);
}

TEST(StateVector, ProjectionProbability) {
  auto s = apply(QuantumState(2), Gate::ry(1, 2.0 * std::acos(std::sqrt(0.3))));
  const auto p = partial_project(s, 1, 1);
  EXPECT_NEAR(p.probability, 0.7, 1e-12);
  EXPECT_NEAR(p.state.norm(), 1.0, 1e-12);
  EXPECT_THROW(partial_project(QuantumState(2), 0, 1), NumericalError);
}

TEST(StateVector, DumpIsDeterministic) {
  Circuit c(3);
  c.add(Gate::h(0)).add(Gate::ry(1, 0.25)).add(Gate::cnot(0, 2));
  EXPECT_EQ(dump(c), dump(c));
  EXPECT_NE(dump(c).find("RY 0.25"), std::string::npos);
}

TEST(Qft, InverseUndoesForward) {
  std::mt19937_64 rng(9);
  std::vector<Complex> amps(16);
  std::normal_distribution<double> g;
  for (auto& a : amps) a = {g(rng), g(rng)};
  const auto s = QuantumState::from_amplitudes(amps);
  Circuit c(4);
  for (auto& gate : qft_gates({0, 1, 2, 3}, false)) c.add(gate);
  for (auto& gate : qft_gates({0, 1, 2, 3}, true)) c.add(gate);
  const auto out = run(c, s);
  EXPECT_NEAR(std::abs(inner_product(out, s)), 1.0, 1e-12);
}

// A dyadic eigenphase j / 2^n is read out exactly.
TEST(Qpe, DyadicPhaseWithCertainty) {
  for (int n_clock = 1; n_clock <= 5; ++n_clock) {
    const std::size_t levels = std::size_t{1} << n_clock;
    for (std::size_t j = 0; j < levels; ++j) {
      const double t = 1.0;
      const double lambda0 = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(levels);
      const Eigen::MatrixXd s = Eigen::Vector2d(lambda0, 0.7).asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
      std::vector<int> clock;
      for (int k = 0; k < n_clock; ++k) clock.push_back(1 + k);
      Circuit c(1 + n_clock);
      for (auto& g : qpe_gates(eig, {0}, clock, t, false)) c.add(g);
      const auto out = run(c, QuantumState(1 + n_clock));
      EXPECT_NEAR(std::norm(out[j << 1]), 1.0, 1e-12) << "n_clock " << n_clock << " j " << j;
    }
  }
}

TEST(Pauli, TwoByTwoOracle) {
  const auto d = pauli_decompose(Eigen::MatrixXd{{2, 1}, {1, 2}});
  ASSERT_EQ(d.terms.size(), 2u);
  EXPECT_EQ(d.terms[0].word, "I");
  EXPECT_NEAR(d.terms[0].coefficient, 2.0, 1e-15);
  EXPECT_EQ(d.terms[1].word, "X");
  EXPECT_NEAR(d.terms[1].coefficient, 1.0, 1e-15);
}

TEST(Pauli, DiagonalUsesZWords) {
  const auto d = pauli_decompose(Eigen::Vector4d(1, 2, 3, 4).asDiagonal().toDenseMatrix());
  // diag(1,2,3,4) = 2.5 II - 1 ZI - 0.5 IZ
  std::map<std::string, double> c;
  for (const auto& t : d.terms) c[t.word] = t.coefficient;
  EXPECT_EQ(c.size(), 3u);
  EXPECT_NEAR(c["II"], 2.5, 1e-15);
  EXPECT_NEAR(c["ZI"], -1.0, 1e-15);
  EXPECT_NEAR(c["IZ"], -0.5, 1e-15);
}

TEST(Pauli, RandomSymmetricReconstruction) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int n = 1; n <= 4; ++n) {
    const auto dim = Eigen::Index{1} << n;
    Eigen::MatrixXd a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = g(rng);
    a = (a + a.transpose()).eval();
    const auto d = pauli_decompose(a);
    EXPECT_LT((reconstruct(d) - a).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& t : d.terms) EXPECT_EQ(std::count(t.word.begin(), t.word.end(), 'Y') % 2, 0);
    std::vector<Complex> v(static_cast<std::size_t>(dim));
    for (auto& x : v) x = g(rng);
    const auto av = apply_decomposition(d, v);
    for (Eigen::Index i = 0; i < dim; ++i) {
      Complex ref = 0.0;
      for (Eigen::Index j = 0; j < dim; ++j) ref += a(i, j) * v[static_cast<std::size_t>(j)];
      EXPECT_NEAR(std::abs(av[static_cast<std::size_t>(i)] - ref), 0.0, 1e-12);
    }
  }
  EXPECT_THROW(pauli_decompose(Eigen::MatrixXd{{1, 2}, {0, 1}}), Error);
  EXPECT_THROW(pauli_decompose(Eigen::MatrixXd::Identity(3, 3)), Error);
}

TEST(Vqls, AnsatzFastPathMatchesCircuit) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> angle(0.0, 6.0);
  for (int n = 1; n <= 3; ++n) {
    Ansatz a{n, default_layers(n)};
    Eigen::VectorXd theta(static_cast<Eigen::Index>(a.parameter_count()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = angle(rng);
    const auto s = a.prepare(theta);
    const Eigen::VectorXd fast = a.prepare_real(theta);
    for (std::size_t i = 0; i < s.dimension(); ++i) {
      EXPECT_NEAR(s[i].real(), fast[static_cast<Eigen::Index>(i)], 1e-12);
      EXPECT_NEAR(s[i].imag(), 0.0, 1e-12);
    }
  }
}

TEST(Vqls, CostVanishesAtExactSolution) {
  const Eigen::MatrixXd m{{2, 1}, {1, 2}};
  const auto d = pauli_decompose(m);
  Ansatz a{1, 1};
  // RY(theta)|0> = (cos, sin); x proportional to (1, 1) solves m x = (3, 3)
  const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, std::numbers::pi / 2.0);
  const auto b = QuantumState::from_real(Eigen::Vector2d(1.0, 1.0));
  EXPECT_NEAR(vqls_cost(d, b, a, theta), 0.0, 1e-12);
  const Eigen::VectorXd off = Eigen::VectorXd::Constant(1, 0.0);
  EXPECT_GT(vqls_cost(d, b, a, off), 0.1);
}

TEST(Vqls, SolvesSmallSystems) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int n = 1; n <= 3; ++n) {
    const auto dim = Eigen::Index{1} << n;
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) m(i, j) = g(rng);
    m = m * m.transpose() + Eigen::MatrixXd::Identity(dim, dim) * static_cast<double>(dim);
    Eigen::VectorXd b(dim);
    for (Eigen::Index i = 0; i < dim; ++i) b[i] = g(rng);
    VqlsOptions o;
    o.seed = 3;
    const auto r = vqls_solve(system_of(m, b), o);
    const Eigen::VectorXd exact = m.ldlt().solve(b);
    EXPECT_LT((r.solution - exact).norm(), 1e-3 * exact.norm()) << "n " << n;
    EXPECT_TRUE(r.diagnostics.reached_tolerance);
  }
}

TEST(Vqls, DeterministicUnderSeed) {
  const Network net = builtin_fixture(Fixture::two_loop);
  VqlsBackend b;
  b.options.seed = 17;
  NrOptions o;
  o.seed = 5;
  const auto a1 = nr_solve(net, b, o);
  const auto a2 = nr_solve(net, b, o);
  ASSERT_TRUE(a1.converged);
  EXPECT_EQ(a1.iterations, a2.iterations);
  EXPECT_EQ(a1.state.h, a2.state.h);
}

TEST(Vqls, NewtonMatchesClassicalOnTwoLoop) {
  const Network net = builtin_fixture(Fixture::two_loop);
  const auto ref = nr_solve(net, ClassicalBackend{});
  const auto q = nr_solve(net, VqlsBackend{});
  ASSERT_TRUE(q.converged);
  EXPECT_LT((pressures(net, q.state) - pressures(net, ref.state)).cwiseAbs().maxCoeff(), 1e-4);
}

// Eigenvalues 1 and 3 with t = pi/2 give phases 1/4 and 3/4, both exact on two clock bits.
TEST(Hhl, ExactForResolvedEigenvalues) {
  const auto sys = system_of(Eigen::MatrixXd{{2, 1}, {1, 2}}, Eigen::Vector2d(1.0, 0.3));
  for (int n_clock = 2; n_clock <= 5; ++n_clock) {
    HhlConfig cfg;
    cfg.n_clock = n_clock;
    cfg.evolution_time = std::numbers::pi / 2.0;
    cfg.rotation_constant = 0.25;
    const auto r = hhl_solve(sys, cfg);
    const Eigen::VectorXd exact = sys.matrix.ldlt().solve(sys.rhs);
    EXPECT_LT((r.solution - exact).norm(), 1e-10 * exact.norm()) << n_clock;
    EXPECT_GT(r.success_probability, 0.0);
    EXPECT_FALSE(r.phase_window_violation);
  }
}

TEST(Hhl, ChooseConfigRespectsCap) {
  const Network net = builtin_fixture(Fixture::two_loop);
  const auto sys = pad_to_power_of_two(assemble_step(net, incidence(net), initial_guess(net)));
  const auto small = choose_config(sys, 3);
  EXPECT_EQ(small.n_clock, 3);
  const auto big = choose_config(sys, 12);
  EXPECT_LE(big.n_clock, 12);
  EXPECT_GE(big.n_clock, small.n_clock);
  EXPECT_LT(gershgorin_upper_bound(sys.matrix) * big.evolution_time, 2.0 * std::numbers::pi);
}

// More clock qubits never make the first Newton system worse by much and
// eventually resolve it well.
TEST(Hhl, AccuracyImprovesWithClockQubits) {
  const Network net = builtin_fixture(Fixture::two_loop);
  const auto sys = pad_to_power_of_two(assemble_step(net, incidence(net), initial_guess(net)));
  const Eigen::VectorXd exact = sys.matrix.ldlt().solve(sys.rhs);
  std::vector<double> err;
  for (int c = 2; c <= 10; ++c) {
    const auto r = hhl_solve(sys, choose_config(sys, c));
    err.push_back((r.solution - exact).norm() / exact.norm());
  }
  EXPECT_LT(err.back(), err.front());
  EXPECT_LT(err.back(), 0.2);
  for (std::size_t i = 2; i < err.size(); ++i) EXPECT_LE(err[i], err[i - 2] * 1.5 + 1e-3);
}

TEST(Hhl, ZeroLoopMatchesClassical) {
  const Network net = builtin_fixture(Fixture::zero_loop);
  const auto ref = nr_solve(net, ClassicalBackend{});
  HhlBackend b;
  b.max_clock = 10;
  const auto q = nr_solve(net, b);
  ASSERT_TRUE(q.converged);
  const Eigen::VectorXd p = pressures(net, q.state), pr = pressures(net, ref.state);
  for (Eigen::Index j = 0; j < p.size(); ++j) EXPECT_NEAR(p[j], pr[j], 1e-2 * std::abs(pr[j]));
}

TEST(Hhl, RejectsBadInput) {
  HhlConfig cfg;
  EXPECT_THROW(hhl_solve(system_of(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(1, 1, 1)), cfg), Error);
  EXPECT_THROW(hhl_solve(system_of(Eigen::MatrixXd{{1, 2}, {0, 1}}, Eigen::Vector2d(1, 1)), cfg), Error);
  EXPECT_THROW(hhl_solve(system_of(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0, 0)), cfg), NumericalError);
  cfg.n_clock = 0;
  EXPECT_THROW(cfg.validate(), Error);
}
