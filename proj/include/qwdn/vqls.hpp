#pragma once

// Variational quantum linear solver. The system matrix is expanded in Pauli
// words, a layered RY/CZ ansatz prepares |x(theta)>, and a derivative-free
// simplex search minimizes the global cost
//
//   C(theta) = 1 - |<b|psi>|^2,  |psi> = A|x(theta)> / |A|x(theta)>|.
//
// The cost is read directly from emulator amplitudes. On hardware the overlap
// would be estimated with Hadamard-test circuits instead.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <utility>
#include <random>
#include <string>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/gga.hpp"
#include "qwdn/nelder_mead.hpp"
#include "qwdn/statevector.hpp"

namespace qwdn {

struct PauliTerm {
  double coefficient;
  std::string word;  // word[0] acts on the most significant qubit
};

struct PauliDecomposition {
  int n_qubits = 0;
  std::vector<PauliTerm> terms;
};

namespace vqls_detail {

struct PauliMasks {
  std::size_t x = 0;
  std::size_t z = 0;
  int y_count = 0;
};

inline PauliMasks masks(const std::string& word) {
  PauliMasks m;
  const int n = static_cast<int>(word.size());
  for (int i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << (n - 1 - i);
    switch (word[static_cast<std::size_t>(i)]) {
      case 'I': break;
      case 'X': m.x |= bit; break;
      case 'Z': m.z |= bit; break;
      case 'Y':
        m.x |= bit;
        m.z |= bit;
        ++m.y_count;
        break;
      default: throw Error(std::string("invalid Pauli letter '") + word[static_cast<std::size_t>(i)] + "'");
    }
  }
  return m;
}

inline Complex i_power(int k) {
  switch (((k % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
  }
}

// Phase of P|k> = phase(k) |k ^ x>.
inline Complex phase(const PauliMasks& m, std::size_t k) {
  const Complex base = i_power(m.y_count);
  return (std::popcount(k & m.z) & 1) ? -base : base;
}

inline std::string word_of(std::size_t index, int n) {
  static constexpr char letters[4] = {'I', 'X', 'Y', 'Z'};
  std::string w(static_cast<std::size_t>(n), 'I');
  for (int q = n - 1; q >= 0; --q) {
    w[static_cast<std::size_t>(q)] = letters[index & 3];
    index >>= 2;
  }
  return w;
}

}  // namespace vqls_detail

// Coefficients c_l = Tr(P_l A) / 2^n for a real symmetric matrix of size 2^n.
inline PauliDecomposition pauli_decompose(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || !is_power_of_two(a.rows()))
    throw Error("Pauli decomposition needs a square matrix with power-of-two size");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw Error("Pauli decomposition expects a symmetric matrix");
  const int n = log2_exact(a.rows());
  const std::size_t dim = static_cast<std::size_t>(a.rows());
  PauliDecomposition out;
  out.n_qubits = n;
  const std::size_t n_words = std::size_t{1} << (2 * n);
  for (std::size_t w = 0; w < n_words; ++w) {
    auto word = vqls_detail::word_of(w, n);
    const auto m = vqls_detail::masks(word);
    Complex tr = 0.0;
    for (std::size_t k = 0; k < dim; ++k)
      tr += vqls_detail::phase(m, k) * a(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k ^ m.x));
    tr /= static_cast<double>(dim);
    // Real symmetric input only produces real coefficients; an imaginary
    // part means the input or the phase table is inconsistent.
    if (std::abs(tr.imag()) > 1e-10 * scale) throw Error("internal consistency: imaginary Pauli coefficient for " + word);
    if (std::abs(tr.real()) > 1e-12) out.terms.push_back({tr.real(), std::move(word)});
  }
  return out;
}

inline Eigen::MatrixXd reconstruct(const PauliDecomposition& d) {
  const auto dim = Eigen::Index{1} << d.n_qubits;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& t : d.terms) {
    const auto pm = vqls_detail::masks(t.word);
    for (std::size_t k = 0; k < static_cast<std::size_t>(dim); ++k)
      m(static_cast<Eigen::Index>(k ^ pm.x), static_cast<Eigen::Index>(k)) += t.coefficient * vqls_detail::phase(pm, k);
  }
  return m.real();
}

// Applies sum_l c_l P_l to a state vector.
inline std::vector<Complex> apply_decomposition(const PauliDecomposition& d, const std::vector<Complex>& v) {
  std::vector<Complex> out(v.size(), 0.0);
  for (const auto& t : d.terms) {
    const auto pm = vqls_detail::masks(t.word);
    for (std::size_t k = 0; k < v.size(); ++k) out[k ^ pm.x] += t.coefficient * vqls_detail::phase(pm, k) * v[k];
  }
  return out;
}

// Hardware-efficient real-amplitude ansatz: per layer one RY on every qubit,
// then a linear CNOT chain (q -> q+1) before the next layer. A CZ chain in the
// same position does not reach every real state on three qubits.
struct Ansatz {
  int n_qubits = 1;
  int layers = 4;

  std::size_t parameter_count() const { return static_cast<std::size_t>(n_qubits) * static_cast<std::size_t>(layers); }

  Circuit circuit(const Eigen::VectorXd& theta) const {
    check(theta);
    Circuit c(n_qubits);
    for (int l = 0; l < layers; ++l) {
      for (int q = 0; q < n_qubits; ++q) c.add(Gate::ry(q, theta[l * n_qubits + q]));
      if (l + 1 < layers)
        for (int q = 0; q + 1 < n_qubits; ++q) c.add(Gate::cnot(q, q + 1));
    }
    return c;
  }

  QuantumState prepare(const Eigen::VectorXd& theta) const { return run(circuit(theta), QuantumState(n_qubits)); }

  // Same state as prepare(), without building a gate list. Used in the optimizer loop.
  Eigen::VectorXd prepare_real(const Eigen::VectorXd& theta) const {
    check(theta);
    const std::size_t dim = std::size_t{1} << n_qubits;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    a[0] = 1.0;
    for (int l = 0; l < layers; ++l) {
      for (int q = 0; q < n_qubits; ++q) {
        const double c = std::cos(theta[l * n_qubits + q] / 2.0);
        const double s = std::sin(theta[l * n_qubits + q] / 2.0);
        const std::size_t bit = std::size_t{1} << q;
        for (std::size_t i = 0; i < dim; ++i) {
          if (i & bit) continue;
          const double a0 = a[static_cast<Eigen::Index>(i)];
          const double a1 = a[static_cast<Eigen::Index>(i | bit)];
          a[static_cast<Eigen::Index>(i)] = c * a0 - s * a1;
          a[static_cast<Eigen::Index>(i | bit)] = s * a0 + c * a1;
        }
      }
      if (l + 1 < layers) {
        for (int q = 0; q + 1 < n_qubits; ++q) {
          const std::size_t control = std::size_t{1} << q;
          const std::size_t target = std::size_t{1} << (q + 1);
          for (std::size_t i = 0; i < dim; ++i)
            if ((i & control) && !(i & target)) std::swap(a[static_cast<Eigen::Index>(i)], a[static_cast<Eigen::Index>(i | target)]);
        }
      }
    }
    return a;
  }

private:
  void check(const Eigen::VectorXd& theta) const {
    if (static_cast<std::size_t>(theta.size()) != parameter_count())
      throw Error("ansatz expects " + std::to_string(parameter_count()) + " parameters");
  }
};

inline int default_layers(int n_qubits) { return n_qubits <= 3 ? 4 : n_qubits + 1; }

// Global cost 1 - |<b|A x(theta)>|^2 / |A x(theta)|^2, evaluated through the
// Pauli expansion on the emulator state.
inline double vqls_cost(const PauliDecomposition& decomp, const QuantumState& b, const Ansatz& ansatz, const Eigen::VectorXd& theta) {
  if (decomp.n_qubits != ansatz.n_qubits || b.n_qubits() != ansatz.n_qubits) throw Error("VQLS dimension mismatch");
  const auto x = ansatz.prepare(theta);
  const auto ax = apply_decomposition(decomp, x.amplitudes());
  double norm2 = 0.0;
  Complex overlap = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) {
    norm2 += std::norm(ax[i]);
    overlap += std::conj(b[i]) * ax[i];
  }
  if (!(norm2 > 1e-28)) throw NumericalError("degenerate VQLS point: A|x> vanishes");
  return std::clamp(1.0 - std::norm(overlap) / norm2, 0.0, 1.0);
}

// alpha minimizing |A (alpha v) - b|: <Av, b> / <Av, Av>.
inline double magnitude_scale(const Eigen::MatrixXd& a, const Eigen::VectorXd& v, const Eigen::VectorXd& b) {
  const Eigen::VectorXd av = a * v;
  const double denom = av.squaredNorm();
  if (!(denom > 0.0)) throw NumericalError("degenerate VQLS point: A|x> vanishes");
  return av.dot(b) / denom;
}

struct VqlsOptions {
  int layers = 0;  // 0 selects default_layers(n_qubits)
  std::size_t max_evals = 6000;  // per restart
  int restarts = 5;
  double cost_tol = 1e-8;
  std::uint64_t seed = 0;
};

struct VqlsDiagnostics {
  double final_cost = 1.0;
  std::size_t evals = 0;
  int restarts_used = 0;
  bool reached_tolerance = false;
};

struct VqlsResult {
  Eigen::VectorXd solution;
  VqlsDiagnostics diagnostics;
};

inline VqlsResult vqls_solve(const LinearSystem& sys, const VqlsOptions& opts = {}) {
  if (!is_power_of_two(sys.size())) throw Error("VQLS needs a power-of-two system; pad it first");
  const double rhs_norm = sys.rhs.norm();
  if (!(rhs_norm > 0.0)) throw NumericalError("VQLS needs a nonzero right-hand side");

  const auto decomp = pauli_decompose(sys.matrix);
  const Eigen::MatrixXd a = reconstruct(decomp);
  const Eigen::VectorXd b = sys.rhs / rhs_norm;
  Ansatz ansatz{decomp.n_qubits, opts.layers > 0 ? opts.layers : default_layers(decomp.n_qubits)};

  // Matches vqls_cost() on real ansatz states.
  auto cost = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd ax = a * ansatz.prepare_real(theta);
    const double norm2 = ax.squaredNorm();
    if (!(norm2 > 1e-28)) return 1.0;
    const double overlap = ax.dot(b);
    return std::max(0.0, 1.0 - overlap * overlap / norm2);
  };

  VqlsResult result;
  Eigen::VectorXd best_theta;
  double best_cost = std::numeric_limits<double>::infinity();
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    std::mt19937_64 rng(mix_seed(opts.seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd theta0(static_cast<Eigen::Index>(ansatz.parameter_count()));
    for (Eigen::Index i = 0; i < theta0.size(); ++i) theta0[i] = angle(rng);
    SimplexOptions so;
    so.max_evals = opts.max_evals;
    so.target = opts.cost_tol;
    so.initial_step = std::numbers::pi / 4.0;
    const auto run_result = nelder_mead(cost, theta0, so);
    result.diagnostics.evals += run_result.evals;
    result.diagnostics.restarts_used = r + 1;
    if (run_result.f < best_cost) {
      best_cost = run_result.f;
      best_theta = run_result.x;
    }
    if (best_cost < opts.cost_tol) break;
  }

  const Eigen::VectorXd v = ansatz.prepare_real(best_theta);
  result.solution = magnitude_scale(a, v, sys.rhs) * v;
  result.diagnostics.final_cost = best_cost;
  result.diagnostics.reached_tolerance = best_cost < opts.cost_tol;
  return result;
}

// Newton-loop adapter: pads to the next power of two and truncates the answer.
struct VqlsBackend {
  VqlsOptions options{};

  LinearSolveResult operator()(const LinearSystem& sys, SolveContext ctx) const {
    auto opts = options;
    opts.seed = mix_seed(options.seed, ctx.seed);
    const auto solved = vqls_solve(pad_to_power_of_two(sys), opts);
    return {solved.solution.head(sys.size()),
            {{"final_cost", solved.diagnostics.final_cost},
             {"evals", static_cast<double>(solved.diagnostics.evals)},
             {"restarts_used", static_cast<double>(solved.diagnostics.restarts_used)},
             {"reached_tolerance", solved.diagnostics.reached_tolerance ? 1.0 : 0.0}}};
  }
};

}  // namespace qwdn
