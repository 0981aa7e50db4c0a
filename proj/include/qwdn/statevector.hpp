#pragma once

// Exact state-vector emulation of small qubit registers. Qubit 0 is the least
// significant bit of the amplitude index. No noise, no shot sampling.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qwdn/error.hpp"

namespace qwdn {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 20;

class QuantumState {
public:
  // |0...0> on n qubits.
  explicit QuantumState(int n_qubits) : QuantumState(n_qubits, 0) {}

  QuantumState(int n_qubits, std::size_t basis_index) : n_qubits_(checked_size(n_qubits)), amps_(std::size_t{1} << n_qubits) {
    if (basis_index >= amps_.size()) throw Error("basis index out of range");
    amps_[basis_index] = 1.0;
  }

  // Normalizes the given amplitudes; the vector length must be a power of two.
  static QuantumState from_amplitudes(std::vector<Complex> amps) {
    int n = 0;
    while ((std::size_t{1} << n) < amps.size()) ++n;
    if (amps.empty() || (std::size_t{1} << n) != amps.size()) throw Error("amplitude count must be a power of two");
    double norm = 0.0;
    for (const auto& a : amps) norm += std::norm(a);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("cannot normalize a zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(norm);
    for (auto& a : amps) a *= inv;
    QuantumState s(n);
    s.amps_ = std::move(amps);
    return s;
  }

  static QuantumState from_real(const Eigen::VectorXd& v) {
    std::vector<Complex> amps(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) amps[static_cast<std::size_t>(i)] = v[i];
    return from_amplitudes(std::move(amps));
  }

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return amps_.size(); }
  const std::vector<Complex>& amplitudes() const noexcept { return amps_; }
  Complex operator[](std::size_t i) const { return amps_[i]; }

  double norm() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  Eigen::VectorXd real_part() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(amps_.size()));
    for (std::size_t i = 0; i < amps_.size(); ++i) v[static_cast<Eigen::Index>(i)] = amps_[i].real();
    return v;
  }

  // Mutable access for gate kernels; callers are responsible for unitarity.
  std::vector<Complex>& mutable_amplitudes() noexcept { return amps_; }

private:
  static int checked_size(int n) {
    if (n < 1 || n > kMaxQubits)
      throw Error("register size " + std::to_string(n) + " outside [1, " + std::to_string(kMaxQubits) + "]");
    return n;
  }

  int n_qubits_;
  std::vector<Complex> amps_;
};

enum class GateKind { h, x, ry, cz, cnot, controlled_unitary, unitary };

struct Gate {
  GateKind kind;
  std::vector<int> targets;
  std::vector<int> controls;
  double angle = 0.0;
  Eigen::MatrixXcd matrix;  // only for controlled_unitary / unitary

  static Gate h(int q) { return {GateKind::h, {q}, {}, 0.0, {}}; }
  static Gate x(int q) { return {GateKind::x, {q}, {}, 0.0, {}}; }
  static Gate ry(int q, double theta) { return {GateKind::ry, {q}, {}, theta, {}}; }
  static Gate cz(int a, int b) { return {GateKind::cz, {b}, {a}, 0.0, {}}; }
  static Gate cnot(int control, int target) { return {GateKind::cnot, {target}, {control}, 0.0, {}}; }
  static Gate unitary(std::vector<int> targets, Eigen::MatrixXcd m) {
    return {GateKind::unitary, std::move(targets), {}, 0.0, std::move(m)};
  }
  static Gate controlled(std::vector<int> controls, std::vector<int> targets, Eigen::MatrixXcd m) {
    return {GateKind::controlled_unitary, std::move(targets), std::move(controls), 0.0, std::move(m)};
  }
};

inline bool is_unitary(const Eigen::MatrixXcd& m, double tol = 1e-10) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  return ((m.adjoint() * m) - Eigen::MatrixXcd::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff() <= tol;
}

inline void validate_gate(const Gate& g, int n_qubits) {
  if (g.targets.empty()) throw Error("gate without target");
  std::vector<int> all = g.targets;
  all.insert(all.end(), g.controls.begin(), g.controls.end());
  for (int q : all)
    if (q < 0 || q >= n_qubits) throw Error("qubit index " + std::to_string(q) + " out of range");
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) throw Error("gate acts twice on the same qubit");
  if (g.kind == GateKind::unitary || g.kind == GateKind::controlled_unitary) {
    const auto dim = Eigen::Index{1} << g.targets.size();
    if (g.matrix.rows() != dim || g.matrix.cols() != dim) throw Error("gate matrix dimension does not match its targets");
    if (!is_unitary(g.matrix)) throw Error("gate matrix is not unitary");
  } else if (g.targets.size() != 1) {
    throw Error("fixed gate expects exactly one target");
  }
}

namespace sv_detail {

inline std::size_t mask_of(const std::vector<int>& qubits) {
  std::size_t m = 0;
  for (int q : qubits) m |= std::size_t{1} << q;
  return m;
}

inline void apply_single(std::vector<Complex>& a, int target, std::size_t control_mask, const Complex (&u)[2][2]) {
  const std::size_t bit = std::size_t{1} << target;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i & bit) || (i & control_mask) != control_mask) continue;
    const Complex a0 = a[i];
    const Complex a1 = a[i | bit];
    a[i] = u[0][0] * a0 + u[0][1] * a1;
    a[i | bit] = u[1][0] * a0 + u[1][1] * a1;
  }
}

inline void apply_matrix(std::vector<Complex>& a, const std::vector<int>& targets, std::size_t control_mask,
                         const Eigen::MatrixXcd& m) {
  const std::size_t k = targets.size();
  const std::size_t dim = std::size_t{1} << k;
  const std::size_t target_mask = mask_of(targets);
  std::vector<std::size_t> offsets(dim, 0);
  for (std::size_t local = 0; local < dim; ++local)
    for (std::size_t b = 0; b < k; ++b)
      if (local & (std::size_t{1} << b)) offsets[local] |= std::size_t{1} << targets[b];
  Eigen::VectorXcd in(static_cast<Eigen::Index>(dim));
  for (std::size_t base = 0; base < a.size(); ++base) {
    if ((base & target_mask) || (base & control_mask) != control_mask) continue;
    for (std::size_t l = 0; l < dim; ++l) in[static_cast<Eigen::Index>(l)] = a[base | offsets[l]];
    const Eigen::VectorXcd out = m * in;
    for (std::size_t l = 0; l < dim; ++l) a[base | offsets[l]] = out[static_cast<Eigen::Index>(l)];
  }
}

}  // namespace sv_detail

// In-place gate application.
inline void apply_inplace(QuantumState& state, const Gate& g) {
  validate_gate(g, state.n_qubits());
  auto& a = state.mutable_amplitudes();
  const std::size_t cmask = sv_detail::mask_of(g.controls);
  switch (g.kind) {
    case GateKind::h: {
      const double s = std::numbers::sqrt2 / 2.0;
      const Complex u[2][2] = {{s, s}, {s, -s}};
      sv_detail::apply_single(a, g.targets[0], cmask, u);
      break;
    }
    case GateKind::x:
    case GateKind::cnot: {
      const Complex u[2][2] = {{0.0, 1.0}, {1.0, 0.0}};
      sv_detail::apply_single(a, g.targets[0], cmask, u);
      break;
    }
    case GateKind::ry: {
      const double c = std::cos(g.angle / 2.0);
      const double s = std::sin(g.angle / 2.0);
      const Complex u[2][2] = {{c, -s}, {s, c}};
      sv_detail::apply_single(a, g.targets[0], cmask, u);
      break;
    }
    case GateKind::cz: {
      const std::size_t mask = cmask | (std::size_t{1} << g.targets[0]);
      for (std::size_t i = 0; i < a.size(); ++i)
        if ((i & mask) == mask) a[i] = -a[i];
      break;
    }
    case GateKind::unitary:
    case GateKind::controlled_unitary:
      sv_detail::apply_matrix(a, g.targets, cmask, g.matrix);
      break;
  }
}

inline QuantumState apply(QuantumState state, const Gate& g) {
  apply_inplace(state, g);
  return state;
}

class Circuit {
public:
  explicit Circuit(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) throw Error("register size outside supported range");
  }

  Circuit& add(Gate g) {
    validate_gate(g, n_qubits_);
    gates_.push_back(std::move(g));
    return *this;
  }

  Circuit& append(const Circuit& other) {
    if (other.n_qubits_ != n_qubits_) throw Error("cannot concatenate circuits of different width");
    gates_.insert(gates_.end(), other.gates_.begin(), other.gates_.end());
    return *this;
  }

  int n_qubits() const noexcept { return n_qubits_; }
  const std::vector<Gate>& gates() const noexcept { return gates_; }

private:
  int n_qubits_;
  std::vector<Gate> gates_;
};

inline QuantumState run(const Circuit& circuit, QuantumState state) {
  if (circuit.n_qubits() != state.n_qubits()) throw Error("circuit and state widths differ");
  for (const auto& g : circuit.gates()) apply_inplace(state, g);
  return state;
}

inline Complex inner_product(const QuantumState& a, const QuantumState& b) {
  if (a.dimension() != b.dimension()) throw Error("state size mismatch");
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

struct Projection {
  QuantumState state;
  double probability;
};

// Projects one qubit onto |outcome> and renormalizes the full register.
inline Projection partial_project(const QuantumState& state, int qubit, int outcome) {
  if (qubit < 0 || qubit >= state.n_qubits()) throw Error("qubit index out of range");
  if (outcome != 0 && outcome != 1) throw Error("outcome must be 0 or 1");
  const std::size_t bit = std::size_t{1} << qubit;
  std::vector<Complex> amps = state.amplitudes();
  double p = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const bool set = (i & bit) != 0;
    if (set != (outcome == 1))
      amps[i] = 0.0;
    else
      p += std::norm(amps[i]);
  }
  if (!(p > 1e-300)) throw NumericalError("projection onto a zero-probability outcome");
  return {QuantumState::from_amplitudes(std::move(amps)), std::min(1.0, p)};
}

// One gate per line, e.g. "RY 1.5707963267948966 t=0" or "CU c=0 t=1,2".
inline std::string dump(const Circuit& circuit) {
  std::ostringstream out;
  auto list = [](const std::vector<int>& qs) {
    std::string s;
    for (std::size_t i = 0; i < qs.size(); ++i) s += (i ? "," : "") + std::to_string(qs[i]);
    return s;
  };
  out << "qubits " << circuit.n_qubits() << '\n';
  for (const auto& g : circuit.gates()) {
    switch (g.kind) {
      case GateKind::h: out << "H"; break;
      case GateKind::x: out << "X"; break;
      case GateKind::ry: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "RY %.17g", g.angle);
        out << buf;
        break;
      }
      case GateKind::cz: out << "CZ"; break;
      case GateKind::cnot: out << "CNOT"; break;
      case GateKind::controlled_unitary: out << "CU"; break;
      case GateKind::unitary: out << "U"; break;
    }
    if (!g.controls.empty()) out << " c=" << list(g.controls);
    out << " t=" << list(g.targets) << '\n';
  }
  return out.str();
}

}  // namespace qwdn
