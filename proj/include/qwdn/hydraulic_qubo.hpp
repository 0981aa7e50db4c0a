#pragma once

// Hydraulics and least-cost design as binary polynomials. The head loss uses
// the quadratic surrogate h = r Q |Q| with the Hazen-Williams resistance r, so
// every residual is a polynomial in the encoding bits.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/fixtures.hpp"
#include "qwdn/gga.hpp"
#include "qwdn/network.hpp"
#include "qwdn/qubo.hpp"

namespace qwdn {

inline constexpr double kSurrogateExponent = 2.0;

// Quadratization used on the hydraulic and design paths.
inline constexpr PenaltyRule kDesignPenalty{PenaltyRule::Scope::per_substitution};

inline NrOptions surrogate_options() {
  NrOptions o;
  o.model.exponent = kSurrogateExponent;
  return o;
}

// Classical NR solution of the surrogate hydraulics; the reference for every QUBO-path comparison.
inline SolverReport surrogate_reference(const Network& net) {
  auto rep = nr_solve(net, ClassicalBackend{}, surrogate_options());
  if (!rep.converged) throw NumericalError("surrogate reference solve did not converge");
  return rep;
}

struct HydraulicQuboSpec {
  Network network;
  std::vector<VariableEncoding> flows;  // one signed encoding per pipe, zero offset
  std::vector<VariableEncoding> heads;  // one unsigned encoding per junction
  double w_energy = 1.0;
  double w_continuity = 1.0;

  FixedPointEncoding encoding(int first_bit = 0) const {
    std::vector<VariableEncoding> all(flows);
    all.insert(all.end(), heads.begin(), heads.end());
    return FixedPointEncoding(std::move(all), first_bit);
  }

  void validate() const {
    if (flows.size() != network.pipe_count()) throw Error("need exactly one flow encoding per pipe");
    if (heads.size() != network.junction_count()) throw Error("need exactly one head encoding per junction");
    for (const auto& f : flows)
      if (!f.is_signed || f.offset != 0.0) throw Error("flow encodings must be sign-magnitude with zero offset");
    for (const auto& h : heads)
      if (h.is_signed) throw Error("head encodings must be unsigned");
    if (!(w_energy > 0.0) || !(w_continuity > 0.0)) throw Error("residual weights must be positive");
  }
};

struct EncodingDefaults {
  int flow_bits = 4;  // magnitude bits, plus one sign bit
  int head_bits = 5;
  double head_margin = 20.0;  // window starts this far below the lowest reservoir head
  double head_window = 40.0;
};

// Flow quantum = total demand / (2^bits - 1), so the full supply is representable.
inline VariableEncoding default_flow_encoding(const Network& net, int bits) {
  const double total = net.demands().sum();
  const double top = std::ldexp(1.0, bits) - 1.0;
  return {0.0, total > 0.0 ? total / top : 1e-3, bits, true};
}

inline VariableEncoding default_head_encoding(const Network& net, const EncodingDefaults& d) {
  const double low = net.reservoir_heads().minCoeff() - d.head_margin;
  return {low, d.head_window / (std::ldexp(1.0, d.head_bits) - 1.0), d.head_bits, false};
}

// Residuals are weighted by the inverse squared quantum of their unknowns so
// that one quantization step costs about the same in either equation.
inline HydraulicQuboSpec default_hydraulic_spec(const Network& net, const EncodingDefaults& d = {}) {
  HydraulicQuboSpec spec{net, {}, {}, 1.0, 1.0};
  const auto flow = default_flow_encoding(net, d.flow_bits);
  const auto head = default_head_encoding(net, d);
  spec.flows.assign(net.pipe_count(), flow);
  spec.heads.assign(net.junction_count(), head);
  spec.w_energy = 1.0 / (head.scale * head.scale);
  spec.w_continuity = 1.0 / (flow.scale * flow.scale);
  return spec;
}

namespace detail {

// Q|Q| for a sign-magnitude variable: (2s - 1) m^2.
inline BinaryPolynomial signed_square(const FixedPointEncoding& enc, std::size_t i) {
  const auto& v = enc[i];
  BinaryPolynomial m;
  for (int k = 0; k < v.n_bits; ++k) m.add_term({enc.first_bit(i) + k}, v.scale * std::ldexp(1.0, k));
  const BinaryPolynomial sign = BinaryPolynomial::variable(enc.sign_bit(i), 2.0) + (-1.0);
  return sign * m.squared();
}

inline BinaryPolynomial node_head(const Network& net, const FixedPointEncoding& enc, NodeRef n) {
  if (n.kind == NodeKind::reservoir) return BinaryPolynomial(net.reservoirs()[n.index].head);
  return value_polynomial(enc, net.pipe_count() + n.index);
}

// Energy residual of pipe p given a polynomial resistance.
inline BinaryPolynomial energy_polynomial(const Network& net, const FixedPointEncoding& enc, std::size_t p,
                                          const BinaryPolynomial& resistance) {
  return resistance * signed_square(enc, p) - node_head(net, enc, net.pipe_start(p)) + node_head(net, enc, net.pipe_end(p));
}

inline BinaryPolynomial continuity_polynomial(const Network& net, const FixedPointEncoding& enc, std::size_t j) {
  BinaryPolynomial c(-net.junctions()[j].base_demand);
  for (std::size_t p = 0; p < net.pipe_count(); ++p) {
    if (net.pipe_end(p).kind == NodeKind::junction && net.pipe_end(p).index == j) c += value_polynomial(enc, p);
    if (net.pipe_start(p).kind == NodeKind::junction && net.pipe_start(p).index == j) c += value_polynomial(enc, p) * -1.0;
  }
  return c;
}

}  // namespace detail

// sum_p w_E E_p^2 + sum_j w_C C_j^2 over the encoded flows and heads.
inline BinaryPolynomial build_hydraulic_polynomial(const HydraulicQuboSpec& spec) {
  spec.validate();
  const auto enc = spec.encoding();
  const auto& net = spec.network;
  const Eigen::VectorXd r = pipe_resistances(net);
  BinaryPolynomial obj;
  for (std::size_t p = 0; p < net.pipe_count(); ++p)
    obj += detail::energy_polynomial(net, enc, p, BinaryPolynomial(r[static_cast<Eigen::Index>(p)])).squared() * spec.w_energy;
  for (std::size_t j = 0; j < net.junction_count(); ++j)
    obj += detail::continuity_polynomial(net, enc, j).squared() * spec.w_continuity;
  return obj;
}

inline HydraulicState decode_state(const HydraulicQuboSpec& spec, std::span<const std::uint8_t> bits) {
  const auto enc = spec.encoding();
  const Eigen::VectorXd x = enc.decode(bits);
  const auto np = static_cast<Eigen::Index>(spec.network.pipe_count());
  return {x.head(np), x.tail(static_cast<Eigen::Index>(spec.network.junction_count()))};
}

// Same objective computed from a real-valued state, independent of the polynomial.
inline double hydraulic_objective(const HydraulicQuboSpec& spec, const HydraulicState& s) {
  const auto inc = incidence(spec.network);
  HeadLossModel model;
  model.exponent = kSurrogateExponent;
  const Eigen::VectorXd e = energy_residual(spec.network, inc, pipe_resistances(spec.network), s, model);
  const Eigen::VectorXd c = continuity_residual(spec.network, inc, s);
  return spec.w_energy * e.squaredNorm() + spec.w_continuity * c.squaredNorm();
}

// Largest relative deviation over all flows and heads.
inline double state_relative_error(const HydraulicState& s, const HydraulicState& ref) {
  double worst = 0.0;
  auto scan = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1e-9));
  };
  scan(s.q, ref.q);
  scan(s.h, ref.h);
  return worst;
}

inline double head_relative_error(const HydraulicState& s, const HydraulicState& ref) {
  return ((s.h - ref.h).cwiseAbs().array() / ref.h.cwiseAbs().cwiseMax(1e-9).array()).maxCoeff();
}

struct DirectResult {
  HydraulicState best;
  SampleSet samples;  // over the quadratized model, original bits first
  double best_objective = 0.0;  // hydraulic objective of the decoded best sample
  int original_variables = 0;
  int aux_variables = 0;
};

inline DirectResult simulate_direct(const HydraulicQuboSpec& spec, const AnnealOptions& opts = {}) {
  const auto poly = build_hydraulic_polynomial(spec);
  const auto enc = spec.encoding();
  const auto quad = quadratize(poly, kDesignPenalty, enc.end_bit());
  DirectResult out;
  out.samples = anneal(quad.model, opts);
  out.best = decode_state(spec, out.samples.best().bits);
  out.best_objective = hydraulic_objective(spec, out.best);
  out.original_variables = quad.original_count;
  out.aux_variables = quad.aux_count;
  return out;
}

// One row per sample and element: energy, decoded value and surrogate reference.
struct DirectRecord {
  std::size_t sample = 0;
  double energy = 0.0;
  std::string kind;  // "flow" or "head"
  std::string element;
  double value = 0.0;
  double reference = 0.0;
};

inline std::vector<DirectRecord> direct_records(const HydraulicQuboSpec& spec, const DirectResult& result,
                                                const HydraulicState& reference) {
  std::vector<DirectRecord> rows;
  const auto& net = spec.network;
  for (std::size_t s = 0; s < result.samples.samples.size(); ++s) {
    const auto& sample = result.samples.samples[s];
    const auto state = decode_state(spec, sample.bits);
    for (std::size_t p = 0; p < net.pipe_count(); ++p)
      rows.push_back({s, sample.energy, "flow", net.pipes()[p].id, state.q[static_cast<Eigen::Index>(p)],
                      reference.q[static_cast<Eigen::Index>(p)]});
    for (std::size_t j = 0; j < net.junction_count(); ++j)
      rows.push_back({s, sample.energy, "head", net.junctions()[j].id, state.h[static_cast<Eigen::Index>(j)],
                      reference.h[static_cast<Eigen::Index>(j)]});
  }
  return rows;
}

inline void write_direct_records(std::ostream& out, const std::vector<DirectRecord>& rows) {
  out << "sample,energy,kind,element,value,reference\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%s,%s,%.9g,%.9g\n", r.sample, r.energy, r.kind.c_str(), r.element.c_str(), r.value,
                  r.reference);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Least-cost design

struct LcdSpec {
  Network network;
  std::vector<double> diameters;  // candidates shared by every pipe, m
  std::vector<double> unit_costs;  // per metre of pipe, same order as diameters
  double min_pressure = 0.0;  // required head above elevation at every junction, m
  double p_onehot = 1.0;
  double p_hyd = 1.0;
  double p_press = 1.0;
  std::vector<VariableEncoding> flows;
  std::vector<VariableEncoding> heads;
  std::vector<VariableEncoding> slacks;  // one unsigned encoding per junction, zero offset
  double w_energy = 1.0;  // residual normalization inside the hydraulic and pressure penalties
  double w_continuity = 1.0;

  std::size_t candidate_count() const { return diameters.size(); }
  int choice_bit(std::size_t pipe, std::size_t candidate) const { return static_cast<int>(pipe * candidate_count() + candidate); }
  int choice_bits() const { return static_cast<int>(network.pipe_count() * candidate_count()); }

  // Flows, heads and slacks, laid out after the one-hot choice bits.
  FixedPointEncoding encoding() const {
    std::vector<VariableEncoding> all(flows);
    all.insert(all.end(), heads.begin(), heads.end());
    all.insert(all.end(), slacks.begin(), slacks.end());
    return FixedPointEncoding(std::move(all), choice_bits());
  }

  void validate() const {
    if (diameters.empty()) throw Error("LCD needs at least one candidate diameter");
    if (unit_costs.size() != diameters.size()) throw Error("one unit cost per candidate diameter");
    for (std::size_t c = 0; c < diameters.size(); ++c) {
      if (!(diameters[c] > 0.0)) throw Error("candidate diameters must be positive");
      if (!(unit_costs[c] > 0.0)) throw Error("unit costs must be positive");
    }
    if (!(p_onehot > 0.0) || !(p_hyd > 0.0) || !(p_press > 0.0)) throw Error("LCD penalties must be positive");
    if (flows.size() != network.pipe_count() || heads.size() != network.junction_count() || slacks.size() != network.junction_count())
      throw Error("LCD encodings do not match the network");
    for (const auto& f : flows)
      if (!f.is_signed || f.offset != 0.0) throw Error("flow encodings must be sign-magnitude with zero offset");
    for (const auto& s : slacks)
      if (s.is_signed || s.offset != 0.0) throw Error("slack encodings must be unsigned with zero offset");
  }
};

inline constexpr int kSlackBits = 6;

// Shipped calibrated values for the zero_loop design fixture (see tools/calibrate_lcd.cpp).
inline const std::vector<double> kLcdDiameters{0.25, 0.5, 1.0};
inline const std::vector<double> kLcdUnitCosts{1.0, 2.0, 8.0};
inline constexpr double kLcdMinPressure = 80.0;

// Penalties: P_hyd = P_press = sum of the most expensive installation, P_onehot = 10 P_hyd.
inline LcdSpec make_lcd_spec(const Network& net, std::vector<double> diameters, std::vector<double> unit_costs,
                             double min_pressure, const EncodingDefaults& d = {}) {
  LcdSpec spec{net, std::move(diameters), std::move(unit_costs), min_pressure};
  const auto flow = default_flow_encoding(net, d.flow_bits);
  const auto head = default_head_encoding(net, d);
  spec.flows.assign(net.pipe_count(), flow);
  spec.heads.assign(net.junction_count(), head);
  spec.slacks.assign(net.junction_count(), VariableEncoding{0.0, head.scale, kSlackBits, false});
  spec.w_energy = 1.0 / (head.scale * head.scale);
  spec.w_continuity = 1.0 / (flow.scale * flow.scale);
  double total_length = 0.0;
  for (const auto& p : net.pipes()) total_length += p.length;
  const double max_cost = spec.unit_costs.empty() ? 0.0 : *std::max_element(spec.unit_costs.begin(), spec.unit_costs.end());
  spec.p_hyd = total_length * max_cost;
  spec.p_press = spec.p_hyd;
  spec.p_onehot = 10.0 * spec.p_hyd;
  spec.validate();
  return spec;
}

// Two magnitude bits represent the zero_loop flows exactly and keep the
// design model small enough for many short reads.
inline constexpr EncodingDefaults kLcdEncoding{2, 4, 20.0, 40.0};

// The 3-node design problem: zero_loop with the shipped cost table and pressure floor.
inline LcdSpec default_lcd_spec() {
  return make_lcd_spec(builtin_fixture(Fixture::zero_loop), kLcdDiameters, kLcdUnitCosts, kLcdMinPressure, kLcdEncoding);
}

// Long anneals freeze the choice bits early behind the one-hot barrier;
// many short reads sample the basins far more evenly.
inline AnnealOptions default_lcd_anneal() {
  AnnealOptions o;
  o.n_reads = 20000;
  o.sweeps = 50;
  return o;
}

inline BinaryPolynomial build_lcd_polynomial(const LcdSpec& spec) {
  spec.validate();
  const auto& net = spec.network;
  const auto enc = spec.encoding();
  const std::size_t np = net.pipe_count(), nj = net.junction_count(), nc = spec.candidate_count();

  BinaryPolynomial cost, onehot, hyd, press;
  for (std::size_t p = 0; p < np; ++p) {
    BinaryPolynomial sum(-1.0), resistance;
    for (std::size_t c = 0; c < nc; ++c) {
      const int z = spec.choice_bit(p, c);
      cost.add_term({z}, net.pipes()[p].length * spec.unit_costs[c]);
      sum.add_term({z}, 1.0);
      resistance.add_term({z}, hazen_williams_resistance(net.pipes()[p].length, spec.diameters[c], net.pipes()[p].roughness));
    }
    onehot += sum.squared();
    hyd += detail::energy_polynomial(net, enc, p, resistance).squared() * spec.w_energy;
  }
  for (std::size_t j = 0; j < nj; ++j) {
    hyd += detail::continuity_polynomial(net, enc, j).squared() * spec.w_continuity;
    BinaryPolynomial gap = value_polynomial(enc, np + nj + j) - value_polynomial(enc, np + j);
    gap += net.junctions()[j].elevation + spec.min_pressure;
    press += gap.squared() * spec.w_energy;
  }
  return cost + onehot * spec.p_onehot + hyd * spec.p_hyd + press * spec.p_press;
}

inline double installation_cost(const LcdSpec& spec, const std::vector<std::size_t>& choice) {
  double c = 0.0;
  for (std::size_t p = 0; p < choice.size(); ++p) c += spec.network.pipes()[p].length * spec.unit_costs[choice[p]];
  return c;
}

// Candidate index per pipe, or nothing when some pipe is not exactly one-hot.
inline std::optional<std::vector<std::size_t>> decode_choice(const LcdSpec& spec, std::span<const std::uint8_t> bits) {
  std::vector<std::size_t> choice;
  for (std::size_t p = 0; p < spec.network.pipe_count(); ++p) {
    int set = 0;
    std::size_t which = 0;
    for (std::size_t c = 0; c < spec.candidate_count(); ++c)
      if (bits[static_cast<std::size_t>(spec.choice_bit(p, c))]) {
        ++set;
        which = c;
      }
    if (set != 1) return std::nullopt;
    choice.push_back(which);
  }
  return choice;
}

// Diameters in millimetres joined by '_', e.g. "500_500".
inline std::string combination_label(const LcdSpec& spec, const std::vector<std::size_t>& choice) {
  std::string s;
  for (std::size_t p = 0; p < choice.size(); ++p) {
    if (p) s += '_';
    s += std::to_string(static_cast<long long>(std::llround(spec.diameters[choice[p]] * 1000.0)));
  }
  return s;
}

inline Network with_diameters(const Network& net, const std::vector<double>& d) {
  auto pipes = net.pipes();
  for (std::size_t p = 0; p < pipes.size(); ++p) pipes[p].diameter = d[p];
  return Network(net.junctions(), net.reservoirs(), std::move(pipes));
}

inline std::vector<double> chosen_diameters(const LcdSpec& spec, const std::vector<std::size_t>& choice) {
  std::vector<double> d;
  for (auto c : choice) d.push_back(spec.diameters[c]);
  return d;
}

inline HydraulicState decode_lcd_state(const LcdSpec& spec, std::span<const std::uint8_t> bits) {
  const Eigen::VectorXd x = spec.encoding().decode(bits);
  const auto np = static_cast<Eigen::Index>(spec.network.pipe_count());
  const auto nj = static_cast<Eigen::Index>(spec.network.junction_count());
  return {x.head(np), x.segment(np, nj)};
}

struct LcdResult {
  std::vector<std::size_t> best_choice;
  std::vector<double> best_diameters;
  HydraulicState best_state;
  double best_energy = 0.0;
  SampleSet samples;
  bool feasible = false;
};

inline LcdResult optimize_lcd(const LcdSpec& spec, const AnnealOptions& opts = {}) {
  const auto poly = build_lcd_polynomial(spec);
  const auto quad = quadratize(poly, kDesignPenalty, spec.encoding().end_bit());
  LcdResult out;
  out.samples = anneal(quad.model, opts);
  for (const auto& s : out.samples.samples) {
    auto choice = decode_choice(spec, s.bits);
    if (!choice) continue;
    out.best_choice = *choice;
    out.best_diameters = chosen_diameters(spec, *choice);
    out.best_state = decode_lcd_state(spec, s.bits);
    out.best_energy = s.energy;
    const double quantum = spec.heads.empty() ? 0.0 : spec.heads.front().scale;
    out.feasible = true;
    for (std::size_t j = 0; j < spec.network.junction_count(); ++j)
      if (out.best_state.h[static_cast<Eigen::Index>(j)] - spec.network.junctions()[j].elevation < spec.min_pressure - quantum)
        out.feasible = false;
    return out;
  }
  throw NumericalError("no one-hot-consistent sample; raise the one-hot penalty or the number of reads");
}

// Repeated independent optimizations; run r anneals with seed opts.seed + r.
inline std::vector<LcdResult> run_lcd_study(const LcdSpec& spec, const AnnealOptions& opts, std::size_t runs) {
  std::vector<LcdResult> out;
  for (std::size_t r = 0; r < runs; ++r) {
    auto o = opts;
    o.seed = opts.seed + r;
    out.push_back(optimize_lcd(spec, o));
  }
  return out;
}

// Classical oracle: surrogate hydraulics for every diameter combination.
struct LcdCombination {
  std::vector<std::size_t> choice;
  std::string label;
  double cost = 0.0;
  double min_pressure_margin = 0.0;  // min_j (H_j - z_j) - H_min
  bool feasible = false;
};

inline std::vector<LcdCombination> enumerate_lcd(const LcdSpec& spec) {
  spec.validate();
  const std::size_t np = spec.network.pipe_count(), nc = spec.candidate_count();
  std::vector<LcdCombination> out;
  std::vector<std::size_t> choice(np, 0);
  while (true) {
    LcdCombination row;
    row.choice = choice;
    row.label = combination_label(spec, choice);
    row.cost = installation_cost(spec, choice);
    const Network net = with_diameters(spec.network, chosen_diameters(spec, choice));
    const auto ref = surrogate_reference(net);
    row.min_pressure_margin = pressures(net, ref.state).minCoeff() - spec.min_pressure;
    row.feasible = row.min_pressure_margin >= 0.0;
    out.push_back(std::move(row));
    std::size_t p = 0;
    while (p < np && ++choice[p] == nc) choice[p++] = 0;
    if (p == np) break;
  }
  return out;
}

// Cheapest feasible combination and whether it is the only one at that cost.
struct LcdOptimum {
  std::optional<LcdCombination> best;
  bool unique = false;
};

inline LcdOptimum lcd_optimum(const std::vector<LcdCombination>& rows) {
  LcdOptimum o;
  for (const auto& r : rows) {
    if (!r.feasible) continue;
    if (!o.best || r.cost < o.best->cost) {
      o.best = r;
      o.unique = true;
    } else if (r.cost == o.best->cost) {
      o.unique = false;
    }
  }
  return o;
}

// One row per sample: run index, combination label (or "invalid"), energy.
struct LcdRecord {
  std::size_t run = 0;
  std::string label;
  double energy = 0.0;
};

inline std::vector<LcdRecord> lcd_records(const LcdSpec& spec, const LcdResult& result, std::size_t run) {
  std::vector<LcdRecord> rows;
  for (const auto& s : result.samples.samples) {
    const auto choice = decode_choice(spec, s.bits);
    rows.push_back({run, choice ? combination_label(spec, *choice) : std::string("invalid"), s.energy});
  }
  return rows;
}

inline void write_lcd_records(std::ostream& out, const std::vector<LcdRecord>& rows) {
  out << "run,combination,energy\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.9g\n", r.run, r.label.c_str(), r.energy);
    out << buf;
  }
}

}  // namespace qwdn
