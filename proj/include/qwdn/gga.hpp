#pragma once

// Newton-Raphson global gradient algorithm for demand-driven pipe networks.
//
// Unknowns are the signed pipe flows q and junction heads H. Each Newton step
// eliminates the flow correction and solves the junction-head Schur system
//
//   S dH = C - A21 D^-1 E,   S = A21 D^-1 A12
//
// where E = h(q) + A12 H + A10 H0 is the energy residual, C = A21 q - demand
// the continuity residual and D the head-loss derivative. The linear solve is
// delegated to a pluggable backend so that the emulated quantum solvers can
// stand in for the classical factorization.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/network.hpp"

namespace qwdn {

inline constexpr double kHazenWilliamsExponent = 1.852;

// SI Hazen-Williams resistance: h = r q |q|^0.852 with h in m and q in m^3/s.
inline double hazen_williams_resistance(double length, double diameter, double roughness) {
  return 10.667 * length / (std::pow(roughness, 1.852) * std::pow(diameter, 4.871));
}

inline double hazen_williams_resistance(const Pipe& p) {
  return hazen_williams_resistance(p.length, p.diameter, p.roughness);
}

inline double headloss(double q, double r, double n) { return r * q * std::pow(std::abs(q), n - 1.0); }

struct HydraulicState {
  Eigen::VectorXd q;  // per pipe, m^3/s, positive from start to end node
  Eigen::VectorXd h;  // per junction, m
};

inline Eigen::VectorXd pressures(const Network& net, const HydraulicState& s) { return s.h - net.elevations(); }

struct LinearSystem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;
  double condition_estimate = 1.0;

  Eigen::Index size() const { return matrix.rows(); }
};

// Ratio of Gershgorin bounds; a crude fallback when the matrix cannot be factorized.
inline double gershgorin_condition(const Eigen::MatrixXd& m) {
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double off = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
    hi = std::max(hi, std::abs(m(i, i)) + off);
    lo = std::min(lo, m(i, i) - off);
  }
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max(1.0, hi / lo);
}

inline double gershgorin_upper_bound(const Eigen::MatrixXd& m) {
  double hi = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) hi = std::max(hi, m.row(i).cwiseAbs().sum());
  return hi;
}

// kappa ~ lambda_max / lambda_min from 30 power iterations on S and on S^-1.
// This is an estimate, not the exact spectral condition number.
inline double estimate_condition(const Eigen::MatrixXd& s) {
  constexpr int kIterations = 30;
  const Eigen::Index n = s.rows();
  if (n == 1) return 1.0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
    return gershgorin_condition(s);

  auto power = [&](auto&& apply) {
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0).normalized();
    double lambda = 0.0;
    for (int k = 0; k < kIterations; ++k) {
      Eigen::VectorXd w = apply(v);
      lambda = v.dot(w);
      const double norm = w.norm();
      if (!(norm > 0.0)) break;
      v = w / norm;
    }
    return lambda;
  };
  const double lmax = power([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(s * v); });
  const double inv_lmin = power([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(ldlt.solve(v)); });
  if (!(lmax > 0.0) || !(inv_lmin > 0.0)) return gershgorin_condition(s);
  return std::max(1.0, lmax * inv_lmin);
}

// Power-of-two embedding (at least 2x2, one qubit) used by the qubit-register
// backends: ones on the padded diagonal and zeros in the padded right-hand side.
inline LinearSystem pad_to_power_of_two(const LinearSystem& sys) {
  Eigen::Index dim = 2;
  while (dim < sys.size()) dim *= 2;
  if (dim == sys.size()) return sys;
  LinearSystem out;
  out.matrix = Eigen::MatrixXd::Identity(dim, dim);
  out.matrix.topLeftCorner(sys.size(), sys.size()) = sys.matrix;
  out.rhs = Eigen::VectorXd::Zero(dim);
  out.rhs.head(sys.size()) = sys.rhs;
  out.condition_estimate = sys.condition_estimate;
  return out;
}

inline bool is_power_of_two(Eigen::Index n) { return n >= 1 && (n & (n - 1)) == 0; }

inline int log2_exact(Eigen::Index n) {
  int k = 0;
  while ((Eigen::Index{1} << k) < n) ++k;
  return k;
}

// Ordered key/value diagnostics reported by a backend for one linear solve.
using Diagnostics = std::vector<std::pair<std::string, double>>;

struct LinearSolveResult {
  Eigen::VectorXd solution;
  Diagnostics diagnostics;
};

// Per-call context handed to a backend: the Newton iteration index and a
// seed derived from the run seed.
struct SolveContext {
  std::size_t iteration = 0;
  std::uint64_t seed = 0;
};

template <typename B>
concept LinearSolverBackend = requires(B b, const LinearSystem& sys, SolveContext ctx) {
  { b(sys, ctx) } -> std::convertible_to<LinearSolveResult>;
};

inline Eigen::VectorXd classical_solve(const LinearSystem& sys) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys.matrix);
  if (!lu.isInvertible()) throw NumericalError("singular matrix");
  Eigen::VectorXd x = lu.solve(sys.rhs);
  if (!x.allFinite()) throw NumericalError("singular matrix");
  return x;
}

struct ClassicalBackend {
  LinearSolveResult operator()(const LinearSystem& sys, SolveContext) const { return {classical_solve(sys), {}}; }
};

struct HeadLossModel {
  double exponent = kHazenWilliamsExponent;
  double flow_floor = 1e-6;  // |q| clamp in the derivative, m^3/s
};

inline Eigen::VectorXd pipe_resistances(const Network& net) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(net.pipe_count()));
  for (std::size_t p = 0; p < net.pipe_count(); ++p) r[static_cast<Eigen::Index>(p)] = hazen_williams_resistance(net.pipes()[p]);
  return r;
}

inline Eigen::VectorXd energy_residual(const Network& net, const IncidenceDecomposition& inc, const Eigen::VectorXd& r,
                                       const HydraulicState& s, const HeadLossModel& model) {
  Eigen::VectorXd e = inc.a12 * s.h + inc.a10 * net.reservoir_heads();
  for (Eigen::Index p = 0; p < e.size(); ++p) e[p] += headloss(s.q[p], r[p], model.exponent);
  return e;
}

inline Eigen::VectorXd continuity_residual(const Network& net, const IncidenceDecomposition& inc, const HydraulicState& s) {
  return inc.a21 * s.q - net.demands();
}

// dh/dq with |q| clamped from below so that the diagonal stays invertible.
inline Eigen::VectorXd headloss_derivative(const Eigen::VectorXd& q, const Eigen::VectorXd& r, const HeadLossModel& model) {
  Eigen::VectorXd d(q.size());
  for (Eigen::Index p = 0; p < q.size(); ++p)
    d[p] = model.exponent * r[p] * std::pow(std::max(std::abs(q[p]), model.flow_floor), model.exponent - 1.0);
  return d;
}

inline LinearSystem schur_system(const IncidenceDecomposition& inc, const Eigen::VectorXd& e, const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& d_inv) {
  LinearSystem sys;
  sys.matrix = inc.a21 * d_inv.asDiagonal() * inc.a12;
  sys.matrix = 0.5 * (sys.matrix + sys.matrix.transpose());
  sys.rhs = c - inc.a21 * d_inv.cwiseProduct(e);
  sys.condition_estimate = estimate_condition(sys.matrix);
  return sys;
}

inline LinearSystem assemble_step(const Network& net, const IncidenceDecomposition& inc, const HydraulicState& state,
                                  const HeadLossModel& model = {}) {
  if (state.q.size() != static_cast<Eigen::Index>(net.pipe_count()) ||
      state.h.size() != static_cast<Eigen::Index>(net.junction_count()))
    throw NetworkError("state dimensions do not match the network");
  const Eigen::VectorXd r = pipe_resistances(net);
  const Eigen::VectorXd e = energy_residual(net, inc, r, state, model);
  const Eigen::VectorXd c = continuity_residual(net, inc, state);
  if (!e.allFinite() || !c.allFinite()) throw NumericalError("non-finite residual");
  return schur_system(inc, e, c, headloss_derivative(state.q, r, model).cwiseInverse());
}

// q0 = pipe area * 0.3 m/s from start to end node; all heads at the mean reservoir head.
inline HydraulicState initial_guess(const Network& net) {
  HydraulicState s;
  s.q.resize(static_cast<Eigen::Index>(net.pipe_count()));
  for (std::size_t p = 0; p < net.pipe_count(); ++p) {
    const double d = net.pipes()[p].diameter;
    s.q[static_cast<Eigen::Index>(p)] = 0.25 * std::numbers::pi * d * d * 0.3;
  }
  s.h = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(net.junction_count()), net.reservoir_heads().mean());
  return s;
}

struct NrOptions {
  double tol_mass = 1e-6;    // m^3/s
  double tol_energy = 1e-6;  // m
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
  HeadLossModel model{};
};

struct IterationRecord {
  double residual_norm = 0.0;  // max(|C|inf, |E|inf) before the step
  double step_norm = 0.0;      // |(dq, dH)|_2
  double condition_estimate = 1.0;
  Diagnostics subroutine_diagnostics;
};

enum class Termination { converged, max_iterations, diverged };

struct SolverReport {
  HydraulicState state;
  std::size_t iterations = 0;
  bool converged = false;
  Termination termination = Termination::max_iterations;
  double final_mass_residual = 0.0;
  double final_energy_residual = 0.0;
  std::vector<IterationRecord> per_iteration;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <LinearSolverBackend Backend>
SolverReport nr_solve(const Network& net, Backend&& backend, const NrOptions& opts = {}) {
  const auto inc = incidence(net);
  const Eigen::VectorXd r = pipe_resistances(net);

  SolverReport report;
  report.state = initial_guess(net);
  auto& s = report.state;

  for (std::size_t iter = 0;; ++iter) {
    const Eigen::VectorXd e = energy_residual(net, inc, r, s, opts.model);
    const Eigen::VectorXd c = continuity_residual(net, inc, s);
    if (!e.allFinite() || !c.allFinite() || !s.q.allFinite() || !s.h.allFinite()) {
      report.termination = Termination::diverged;
      report.final_mass_residual = std::numeric_limits<double>::infinity();
      report.final_energy_residual = std::numeric_limits<double>::infinity();
      return report;
    }
    report.final_mass_residual = c.cwiseAbs().maxCoeff();
    report.final_energy_residual = e.cwiseAbs().maxCoeff();
    if (report.final_mass_residual < opts.tol_mass && report.final_energy_residual < opts.tol_energy) {
      report.converged = true;
      report.termination = Termination::converged;
      return report;
    }
    if (iter == opts.max_iter) {
      report.termination = Termination::max_iterations;
      return report;
    }

    const Eigen::VectorXd d_inv = headloss_derivative(s.q, r, opts.model).cwiseInverse();
    const LinearSystem sys = schur_system(inc, e, c, d_inv);

    LinearSolveResult solved;
    try {
      solved = backend(sys, SolveContext{iter, mix_seed(opts.seed, iter)});
    } catch (const std::exception& ex) {
      throw BackendError(iter, ex.what());
    }
    if (solved.solution.size() != sys.size()) throw BackendError(iter, "backend returned a vector of the wrong length");

    const Eigen::VectorXd& dh = solved.solution;
    const Eigen::VectorXd dq = -d_inv.cwiseProduct(e + inc.a12 * dh);
    s.h += dh;
    s.q += dq;
    ++report.iterations;

    IterationRecord rec;
    rec.residual_norm = std::max(report.final_mass_residual, report.final_energy_residual);
    rec.step_norm = std::sqrt(dq.squaredNorm() + dh.squaredNorm());
    rec.condition_estimate = sys.condition_estimate;
    rec.subroutine_diagnostics = std::move(solved.diagnostics);
    report.per_iteration.push_back(std::move(rec));
  }
}

// One line per Newton iteration: index, residual_norm, step_norm, kappa,
// followed by the backend diagnostics as key=value pairs.
inline void write_iteration_log(std::ostream& out, const SolverReport& report) {
  char buf[128];
  for (std::size_t i = 0; i < report.per_iteration.size(); ++i) {
    const auto& rec = report.per_iteration[i];
    std::snprintf(buf, sizeof buf, "%zu %.9g %.9g %.9g", i, rec.residual_norm, rec.step_norm, rec.condition_estimate);
    out << buf;
    for (const auto& [key, value] : rec.subroutine_diagnostics) {
      std::snprintf(buf, sizeof buf, " %s=%.9g", key.c_str(), value);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace qwdn
