#pragma once

// Harrow-Hassidim-Lloyd linear solver on the state-vector emulator.
//
// Register layout (qubit 0 least significant):
//   [0, n_sys)                system register holding |b>
//   [n_sys, n_sys + n_clock)  clock register for phase estimation
//   n_sys + n_clock           rotation ancilla
//
// Controlled time-evolution blocks are exact matrix exponentials of the
// scaled system matrix, so the only approximation is the finite clock
// resolution. Eigenvalues are read as phases phi = lambda t / 2pi in [0, 1).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/gga.hpp"
#include "qwdn/statevector.hpp"

namespace qwdn {

struct HhlConfig {
  int n_clock = 4;
  double evolution_time = 1.0;      // t
  double rotation_constant = 0.0625;  // C, in units of the clock phase

  void validate() const {
    if (n_clock < 1) throw Error("HHL needs at least one clock qubit");
    if (!(evolution_time > 0.0)) throw Error("HHL evolution time must be positive");
    if (!(rotation_constant > 0.0) || rotation_constant > 1.0) throw Error("HHL rotation constant must lie in (0, 1]");
  }
};

// Static policy: enough clock qubits for the condition estimate (capped),
// the largest Gershgorin eigenvalue bound mapped just below the top of the
// phase window, and C equal to the smallest resolvable phase.
inline HhlConfig choose_config(const LinearSystem& sys, int max_clock) {
  HhlConfig cfg;
  const double kappa = std::isfinite(sys.condition_estimate) ? std::max(1.0, sys.condition_estimate) : 1e300;
  const int wanted = static_cast<int>(std::ceil(std::log2(kappa))) + 2;
  cfg.n_clock = std::max(1, std::min(max_clock, wanted));
  const double window = std::ldexp(1.0, -cfg.n_clock);
  const double bound = gershgorin_upper_bound(sys.matrix);
  if (!(bound > 0.0)) throw NumericalError("HHL needs a nonzero matrix");
  cfg.evolution_time = 2.0 * std::numbers::pi * (1.0 - window) / bound;
  cfg.rotation_constant = window;
  return cfg;
}

// Gates of the quantum Fourier transform on the given qubits (qubits[0] is
// the least significant bit of the encoded integer).
inline std::vector<Gate> qft_gates(const std::vector<int>& qubits, bool inverse) {
  std::vector<Gate> gates;
  const int n = static_cast<int>(qubits.size());
  auto cphase = [](int control, int target, double angle) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(2, 2);
    m(1, 1) = std::polar(1.0, angle);
    return Gate::controlled({control}, {target}, m);
  };
  auto swap = [](int a, int b) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(4, 4);
    m(0, 0) = m(3, 3) = m(1, 2) = m(2, 1) = 1.0;
    return Gate::unitary({a, b}, m);
  };
  for (int i = n - 1; i >= 0; --i) {
    gates.push_back(Gate::h(qubits[static_cast<std::size_t>(i)]));
    for (int j = i - 1; j >= 0; --j)
      gates.push_back(cphase(qubits[static_cast<std::size_t>(j)], qubits[static_cast<std::size_t>(i)],
                             std::numbers::pi / std::ldexp(1.0, i - j)));
  }
  for (int i = 0; i < n / 2; ++i) gates.push_back(swap(qubits[static_cast<std::size_t>(i)], qubits[static_cast<std::size_t>(n - 1 - i)]));
  if (!inverse) return gates;

  std::reverse(gates.begin(), gates.end());
  for (auto& g : gates)
    if (g.kind == GateKind::controlled_unitary) g.matrix = g.matrix.adjoint().eval();
  return gates;
}

// exp(i S t 2^k) from the eigendecomposition of the symmetric matrix S.
inline Eigen::MatrixXcd evolution_power(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig, double t, int k, bool inverse) {
  const double sign = inverse ? -1.0 : 1.0;
  Eigen::VectorXcd phases(eig.eigenvalues().size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) phases[i] = std::polar(1.0, sign * eig.eigenvalues()[i] * t * std::ldexp(1.0, k));
  const Eigen::MatrixXcd v = eig.eigenvectors().cast<Complex>();
  return v * phases.asDiagonal() * v.adjoint();
}

// Phase estimation with the clock register on qubits [first_clock, first_clock + n_clock).
inline std::vector<Gate> qpe_gates(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig, const std::vector<int>& system,
                                   const std::vector<int>& clock, double t, bool inverse) {
  std::vector<Gate> gates;
  for (int c : clock) gates.push_back(Gate::h(c));
  for (std::size_t k = 0; k < clock.size(); ++k)
    gates.push_back(Gate::controlled({clock[k]}, system, evolution_power(eig, t, static_cast<int>(k), false)));
  auto qft = qft_gates(clock, true);
  gates.insert(gates.end(), qft.begin(), qft.end());
  if (!inverse) return gates;

  std::vector<Gate> inv;
  auto fwd = qft_gates(clock, false);
  inv.insert(inv.end(), fwd.begin(), fwd.end());
  for (std::size_t k = clock.size(); k-- > 0;)
    inv.push_back(Gate::controlled({clock[k]}, system, evolution_power(eig, t, static_cast<int>(k), true)));
  for (int c : clock) inv.push_back(Gate::h(c));
  return inv;
}

struct HhlResult {
  Eigen::VectorXd solution;
  double success_probability = 0.0;
  bool phase_window_violation = false;
  HhlConfig config;
};

inline HhlResult hhl_solve(const LinearSystem& sys, const HhlConfig& cfg) {
  cfg.validate();
  const Eigen::Index dim = sys.size();
  if (!is_power_of_two(dim)) throw Error("HHL needs a power-of-two system; pad it first");
  const double scale = std::max(1.0, sys.matrix.cwiseAbs().maxCoeff());
  if ((sys.matrix - sys.matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error("HHL expects a symmetric matrix");
  if (!(sys.rhs.norm() > 0.0)) throw NumericalError("HHL needs a nonzero right-hand side");

  const int n_sys = log2_exact(dim);
  if (n_sys == 0) throw Error("HHL needs at least a 2x2 system; pad it first");
  const int n_total = n_sys + cfg.n_clock + 1;
  if (n_total > kMaxQubits) throw Error("HHL register of " + std::to_string(n_total) + " qubits exceeds the emulator limit");

  std::vector<int> system(static_cast<std::size_t>(n_sys)), clock(static_cast<std::size_t>(cfg.n_clock));
  for (int q = 0; q < n_sys; ++q) system[static_cast<std::size_t>(q)] = q;
  for (int k = 0; k < cfg.n_clock; ++k) clock[static_cast<std::size_t>(k)] = n_sys + k;
  const int ancilla = n_sys + cfg.n_clock;

  HhlResult result;
  result.config = cfg;
  result.phase_window_violation = gershgorin_upper_bound(sys.matrix) * cfg.evolution_time > 2.0 * std::numbers::pi;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sys.matrix);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");

  Circuit circuit(n_total);
  auto add_all = [&](const std::vector<Gate>& gs) {
    for (const auto& g : gs) circuit.add(g);
  };
  add_all(qpe_gates(eig, system, clock, cfg.evolution_time, false));

  // Eigenvalue inversion: ancilla RY(2 asin(C / phi)) for every clock value j > 0.
  const std::size_t n_values = std::size_t{1} << cfg.n_clock;
  for (std::size_t j = 1; j < n_values; ++j) {
    const double phi = static_cast<double>(j) / static_cast<double>(n_values);
    const double angle = 2.0 * std::asin(std::min(1.0, cfg.rotation_constant / phi));
    std::vector<int> flips;
    for (int k = 0; k < cfg.n_clock; ++k)
      if (!(j & (std::size_t{1} << k))) flips.push_back(clock[static_cast<std::size_t>(k)]);
    for (int q : flips) circuit.add(Gate::x(q));
    Eigen::MatrixXcd ry(2, 2);
    ry << std::cos(angle / 2.0), -std::sin(angle / 2.0), std::sin(angle / 2.0), std::cos(angle / 2.0);
    circuit.add(Gate::controlled(clock, {ancilla}, ry));
    for (int q : flips) circuit.add(Gate::x(q));
  }

  add_all(qpe_gates(eig, system, clock, cfg.evolution_time, true));

  std::vector<Complex> init(std::size_t{1} << n_total, 0.0);
  for (Eigen::Index i = 0; i < dim; ++i) init[static_cast<std::size_t>(i)] = sys.rhs[i];
  const auto final_state = run(circuit, QuantumState::from_amplitudes(std::move(init)));
  const auto projected = partial_project(final_state, ancilla, 1);
  result.success_probability = projected.probability;

  // System amplitudes on the clock = 0, ancilla = 1 branch.
  const std::size_t base = std::size_t{1} << ancilla;
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = projected.state[base | static_cast<std::size_t>(i)];
  Eigen::Index arg = 0;
  if (!(v.cwiseAbs().maxCoeff(&arg) > 1e-14)) throw NumericalError("HHL post-selection left no amplitude in the system register");
  const Complex unphase = std::conj(v[arg]) / std::abs(v[arg]);
  const Eigen::VectorXd real = (v * unphase).real();

  const Eigen::VectorXd sv = sys.matrix * real;
  const double denom = sv.squaredNorm();
  if (!(denom > 0.0)) throw NumericalError("HHL produced a vector in the null space");
  result.solution = (sv.dot(sys.rhs) / denom) * real;
  return result;
}

// Newton-loop adapter. The configuration is chosen once on the first system
// of a run and reused, unless reconfigure_each_iteration is set.
struct HhlBackend {
  int max_clock = 8;
  bool reconfigure_each_iteration = false;
  std::optional<HhlConfig> fixed_config{};

  LinearSolveResult operator()(const LinearSystem& sys, SolveContext ctx) {
    const auto padded = pad_to_power_of_two(sys);
    if (fixed_config)
      active_ = *fixed_config;
    else if (ctx.iteration == 0 || reconfigure_each_iteration || !active_)
      active_ = choose_config(padded, max_clock);
    const auto solved = hhl_solve(padded, *active_);
    return {solved.solution.head(sys.size()),
            {{"n_clock", static_cast<double>(active_->n_clock)},
             {"t", active_->evolution_time},
             {"C", active_->rotation_constant},
             {"success_probability", solved.success_probability},
             {"phase_window_violation", solved.phase_window_violation ? 1.0 : 0.0}}};
  }

private:
  std::optional<HhlConfig> active_{};
};

}  // namespace qwdn
