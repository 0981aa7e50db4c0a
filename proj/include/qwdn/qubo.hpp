#pragma once

// Binary optimization substrate: fixed-point encodings of real unknowns,
// higher-order binary polynomials, Rosenberg quadratization, QUBO models and
// a simulated-annealing sampler. Bits are stored as std::uint8_t 0/1.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/gga.hpp"

namespace qwdn {

using Bits = std::vector<std::uint8_t>;

// x = offset + scale * sum_k 2^k b_k, or with a sign bit s:
// x = offset + (2s - 1) * scale * sum_k 2^k b_k.
struct VariableEncoding {
  double offset = 0.0;
  double scale = 1.0;
  int n_bits = 8;
  bool is_signed = false;

  int width() const { return n_bits + (is_signed ? 1 : 0); }
  double magnitude_max() const { return scale * (std::ldexp(1.0, n_bits) - 1.0); }
};

// Bit layout: variables back to back; within a variable the magnitude bits
// (least significant first) followed by the sign bit if present.
class FixedPointEncoding {
public:
  FixedPointEncoding() = default;
  explicit FixedPointEncoding(std::vector<VariableEncoding> vars, int first_bit = 0) : vars_(std::move(vars)) {
    int pos = first_bit;
    for (const auto& v : vars_) {
      if (!(v.scale > 0.0)) throw Error("encoding scale must be positive");
      if (v.n_bits < 1) throw Error("encoding needs at least one bit");
      starts_.push_back(pos);
      pos += v.width();
    }
    end_ = pos;
  }

  std::size_t size() const { return vars_.size(); }
  const VariableEncoding& operator[](std::size_t i) const { return vars_[i]; }
  const std::vector<VariableEncoding>& variables() const { return vars_; }
  int first_bit(std::size_t i) const { return starts_[i]; }
  int sign_bit(std::size_t i) const { return starts_[i] + vars_[i].n_bits; }
  int end_bit() const { return end_; }

  double decode(std::size_t i, std::span<const std::uint8_t> bits) const {
    const auto& v = vars_[i];
    double m = 0.0;
    for (int k = 0; k < v.n_bits; ++k)
      if (bits[static_cast<std::size_t>(starts_[i] + k)]) m += std::ldexp(1.0, k);
    m *= v.scale;
    if (v.is_signed && !bits[static_cast<std::size_t>(sign_bit(i))]) m = -m;
    return v.offset + m;
  }

  Eigen::VectorXd decode(std::span<const std::uint8_t> bits) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(vars_.size()));
    for (std::size_t i = 0; i < vars_.size(); ++i) x[static_cast<Eigen::Index>(i)] = decode(i, bits);
    return x;
  }

  // Unsigned encoding of x into bits, rounded to the nearest lattice point and clamped to the range.
  void encode(std::size_t i, double x, std::span<std::uint8_t> bits) const {
    const auto& v = vars_[i];
    double target = x - v.offset;
    if (v.is_signed) {
      bits[static_cast<std::size_t>(sign_bit(i))] = target >= 0.0 ? 1 : 0;
      target = std::abs(target);
    }
    const double max_index = std::ldexp(1.0, v.n_bits) - 1.0;
    auto k = static_cast<std::uint64_t>(std::clamp(std::round(target / v.scale), 0.0, max_index));
    for (int b = 0; b < v.n_bits; ++b) bits[static_cast<std::size_t>(starts_[i] + b)] = (k >> b) & 1U;
  }

private:
  std::vector<VariableEncoding> vars_;
  std::vector<int> starts_;
  int end_ = 0;
};

// Multilinear polynomial over binary variables. Monomials are sorted index
// sets; b*b = b is applied on insertion and zero coefficients are dropped.
class BinaryPolynomial {
public:
  using Monomial = std::vector<int>;

  BinaryPolynomial() = default;
  explicit BinaryPolynomial(double constant) : constant_(constant) {}

  static BinaryPolynomial variable(int index, double coefficient = 1.0) {
    BinaryPolynomial p;
    p.add_term({index}, coefficient);
    return p;
  }

  void add_term(Monomial vars, double coefficient) {
    if (coefficient == 0.0) return;
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    if (vars.empty()) {
      constant_ += coefficient;
      return;
    }
    if (vars.front() < 0) throw Error("negative variable index");
    auto [it, inserted] = terms_.emplace(std::move(vars), coefficient);
    if (!inserted) {
      const double before = it->second;
      it->second += coefficient;
      // Cancellation down to rounding noise counts as exact.
      if (std::abs(it->second) <= 1e-13 * (std::abs(before) + std::abs(coefficient))) terms_.erase(it);
    }
  }

  double constant() const { return constant_; }
  const std::map<Monomial, double>& terms() const { return terms_; }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, static_cast<int>(m.size()));
    return d;
  }

  // One past the largest variable index.
  int variable_count() const {
    int n = 0;
    for (const auto& [m, c] : terms_) n = std::max(n, m.back() + 1);
    return n;
  }

  double coefficient_l1() const {
    double s = 0.0;
    for (const auto& [m, c] : terms_) s += std::abs(c);
    return s;
  }

  double evaluate(std::span<const std::uint8_t> bits) const {
    double v = constant_;
    for (const auto& [m, c] : terms_) {
      bool on = true;
      for (int i : m)
        if (!bits[static_cast<std::size_t>(i)]) {
          on = false;
          break;
        }
      if (on) v += c;
    }
    return v;
  }

  BinaryPolynomial& operator+=(const BinaryPolynomial& o) {
    constant_ += o.constant_;
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }

  BinaryPolynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      constant_ = 0.0;
      return *this;
    }
    constant_ *= s;
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }

  BinaryPolynomial& operator+=(double s) {
    constant_ += s;
    return *this;
  }

  friend BinaryPolynomial operator+(BinaryPolynomial a, const BinaryPolynomial& b) { return a += b; }
  friend BinaryPolynomial operator-(BinaryPolynomial a, BinaryPolynomial b) { return a += (b *= -1.0); }
  friend BinaryPolynomial operator*(BinaryPolynomial a, double s) { return a *= s; }
  friend BinaryPolynomial operator*(double s, BinaryPolynomial a) { return a *= s; }
  friend BinaryPolynomial operator+(BinaryPolynomial a, double s) { return a += s; }

  friend BinaryPolynomial operator*(const BinaryPolynomial& a, const BinaryPolynomial& b) {
    BinaryPolynomial out(a.constant_ * b.constant_);
    for (const auto& [m, c] : a.terms_) out.add_term(m, c * b.constant_);
    for (const auto& [m, c] : b.terms_) out.add_term(m, c * a.constant_);
    Monomial merged;
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        merged.clear();
        std::set_union(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(merged));
        out.add_term(merged, ca * cb);
      }
    }
    return out;
  }

  BinaryPolynomial squared() const { return *this * *this; }

private:
  std::map<Monomial, double> terms_;
  double constant_ = 0.0;
};

// Value of encoded variable i as a polynomial in its bits.
inline BinaryPolynomial value_polynomial(const FixedPointEncoding& enc, std::size_t i) {
  const auto& v = enc[i];
  BinaryPolynomial magnitude;
  for (int k = 0; k < v.n_bits; ++k) magnitude.add_term({enc.first_bit(i) + k}, v.scale * std::ldexp(1.0, k));
  if (!v.is_signed) return magnitude + v.offset;
  BinaryPolynomial sign = BinaryPolynomial::variable(enc.sign_bit(i), 2.0) + (-1.0);
  return sign * magnitude + v.offset;
}

class QuboModel {
public:
  explicit QuboModel(int n_vars = 0) : linear_(static_cast<std::size_t>(n_vars), 0.0) {}

  int variable_count() const { return static_cast<int>(linear_.size()); }
  double offset() const { return offset_; }
  const std::vector<double>& linear() const { return linear_; }
  const std::map<std::pair<int, int>, double>& quadratic() const { return quadratic_; }

  void add_offset(double c) { offset_ += c; }
  void add_linear(int i, double c) {
    grow(i);
    linear_[static_cast<std::size_t>(i)] += c;
  }
  void add_quadratic(int i, int j, double c) {
    if (i == j) {
      add_linear(i, c);
      return;
    }
    if (i > j) std::swap(i, j);
    grow(j);
    if (c == 0.0) return;
    auto [it, inserted] = quadratic_.emplace(std::make_pair(i, j), c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) quadratic_.erase(it);
    }
  }

  double energy(std::span<const std::uint8_t> bits) const {
    if (bits.size() < linear_.size()) throw Error("bit vector shorter than the model");
    double e = offset_;
    for (std::size_t i = 0; i < linear_.size(); ++i)
      if (bits[i]) e += linear_[i];
    for (const auto& [ij, c] : quadratic_)
      if (bits[static_cast<std::size_t>(ij.first)] && bits[static_cast<std::size_t>(ij.second)]) e += c;
    return e;
  }

  static QuboModel from_polynomial(const BinaryPolynomial& p, int n_vars = 0) {
    if (p.degree() > 2) throw Error("polynomial of degree " + std::to_string(p.degree()) + " is not quadratic");
    QuboModel q(std::max(n_vars, p.variable_count()));
    q.add_offset(p.constant());
    for (const auto& [m, c] : p.terms()) {
      if (m.size() == 1)
        q.add_linear(m[0], c);
      else
        q.add_quadratic(m[0], m[1], c);
    }
    return q;
  }

private:
  void grow(int i) {
    if (i < 0) throw Error("negative variable index");
    if (static_cast<std::size_t>(i) >= linear_.size()) linear_.resize(static_cast<std::size_t>(i) + 1, 0.0);
  }

  std::vector<double> linear_;
  std::map<std::pair<int, int>, double> quadratic_;
  double offset_ = 0.0;
};

struct LinearQubo {
  QuboModel model;
  FixedPointEncoding decoder;
};

// QUBO whose energy equals |S x(bits) - rhs|^2 exactly (the constant is folded
// into the model offset). Encodings must be unsigned so that x is linear in bits.
inline LinearQubo linear_system_to_qubo(const LinearSystem& sys, const FixedPointEncoding& enc) {
  const Eigen::Index n = sys.size();
  if (static_cast<Eigen::Index>(enc.size()) != n) throw Error("encoding size does not match the system");
  for (const auto& v : enc.variables())
    if (v.is_signed) throw Error("linear-system QUBO needs unsigned (offset) encodings");

  const int nb = enc.end_bit();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n, nb);
  Eigen::VectorXd offset(n);
  for (std::size_t i = 0; i < enc.size(); ++i) {
    offset[static_cast<Eigen::Index>(i)] = enc[i].offset;
    for (int k = 0; k < enc[i].n_bits; ++k) e(static_cast<Eigen::Index>(i), enc.first_bit(i) + k) = enc[i].scale * std::ldexp(1.0, k);
  }
  const Eigen::MatrixXd se = sys.matrix * e;
  const Eigen::VectorXd r0 = sys.matrix * offset - sys.rhs;
  const Eigen::MatrixXd quad = se.transpose() * se;
  const Eigen::VectorXd lin = 2.0 * se.transpose() * r0;

  LinearQubo out{QuboModel(nb), enc};
  out.model.add_offset(r0.squaredNorm());
  for (int i = 0; i < nb; ++i) {
    out.model.add_linear(i, quad(i, i) + lin[i]);
    for (int j = i + 1; j < nb; ++j) out.model.add_quadratic(i, j, 2.0 * quad(i, j));
  }
  return out;
}

// Penalty weight M = multiplier * (sum |coefficients| + margin). The global
// scope sums over the whole input polynomial and uses one M everywhere. The
// per-substitution scope sums only the monomials rewritten by that auxiliary,
// which is still enough to make an inconsistent y strictly worse but keeps the
// energy barriers much lower for the annealer.
struct PenaltyRule {
  enum class Scope { global, per_substitution };
  Scope scope = Scope::global;
  double multiplier = 2.0;
  double margin = 1.0;

  double weight(double l1) const { return multiplier * (l1 + margin); }
};

struct Quadratized {
  QuboModel model;
  int aux_count = 0;
  int original_count = 0;
  double penalty = 0.0;  // largest weight used
  std::vector<double> penalties;  // weight of each auxiliary
  std::vector<std::pair<int, int>> aux_pairs;  // aux variable original_count + k stands for the product of this pair

  // Completes an assignment of the original variables with consistent auxiliaries.
  Bits extend(std::span<const std::uint8_t> original) const {
    Bits bits(original.begin(), original.begin() + original_count);
    bits.resize(static_cast<std::size_t>(original_count + aux_count), 0);
    for (int k = 0; k < aux_count; ++k) {
      const auto [u, v] = aux_pairs[static_cast<std::size_t>(k)];
      bits[static_cast<std::size_t>(original_count + k)] = bits[static_cast<std::size_t>(u)] & bits[static_cast<std::size_t>(v)];
    }
    return bits;
  }

  bool consistent(std::span<const std::uint8_t> bits) const {
    for (int k = 0; k < aux_count; ++k) {
      const auto [u, v] = aux_pairs[static_cast<std::size_t>(k)];
      if (bits[static_cast<std::size_t>(original_count + k)] != (bits[static_cast<std::size_t>(u)] & bits[static_cast<std::size_t>(v)]))
        return false;
    }
    return true;
  }
};

// Rosenberg reduction: repeatedly replace the most frequent variable pair in
// monomials of degree > 2 by an auxiliary y with penalty
// M (uv - 2uy - 2vy + 3y). Ties go to the lexicographically smallest pair.
inline Quadratized quadratize(const BinaryPolynomial& poly, const PenaltyRule& rule = {}, int n_vars = 0) {
  Quadratized out;
  out.original_count = std::max(n_vars, poly.variable_count());
  const double global_weight = rule.weight(poly.coefficient_l1());

  std::map<BinaryPolynomial::Monomial, double> high;
  BinaryPolynomial low(poly.constant());
  for (const auto& [m, c] : poly.terms()) {
    if (m.size() > 2)
      high.emplace(m, c);
    else
      low.add_term(m, c);
  }

  int next = out.original_count;
  while (!high.empty()) {
    std::map<std::pair<int, int>, int> freq;
    for (const auto& [m, c] : high)
      for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b) ++freq[{m[a], m[b]}];
    auto best = freq.begin();
    for (auto it = freq.begin(); it != freq.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [u, v] = best->first;
    const int y = next++;
    out.aux_pairs.emplace_back(u, v);

    std::map<BinaryPolynomial::Monomial, double> rewritten;
    double replaced_l1 = 0.0;
    for (auto& [m, c] : high) {
      BinaryPolynomial::Monomial nm = m;
      if (std::binary_search(m.begin(), m.end(), u) && std::binary_search(m.begin(), m.end(), v)) {
        replaced_l1 += std::abs(c);
        nm.erase(std::remove_if(nm.begin(), nm.end(), [&](int x) { return x == u || x == v; }), nm.end());
        nm.push_back(y);
        std::sort(nm.begin(), nm.end());
      }
      if (nm.size() > 2) {
        rewritten[nm] += c;
      } else {
        low.add_term(nm, c);
      }
    }
    high.clear();
    for (auto& [m, c] : rewritten)
      if (c != 0.0) high.emplace(m, c);

    const double mw = rule.scope == PenaltyRule::Scope::global ? global_weight : rule.weight(replaced_l1);
    out.penalties.push_back(mw);
    out.penalty = std::max(out.penalty, mw);
    low.add_term({u, v}, mw);
    low.add_term({u, y}, -2.0 * mw);
    low.add_term({v, y}, -2.0 * mw);
    low.add_term({y}, 3.0 * mw);
  }
  out.aux_count = next - out.original_count;
  out.model = QuboModel::from_polynomial(low, next);
  return out;
}

struct Sample {
  Bits bits;
  double energy;
};

struct SampleSet {
  std::vector<Sample> samples;
  std::size_t n_reads = 0;
  std::size_t sweeps = 0;
  std::uint64_t seed = 0;

  const Sample& best() const {
    if (samples.empty()) throw Error("empty sample set");
    return samples.front();
  }
};

inline std::string bit_string(std::span<const std::uint8_t> bits) {
  std::string s(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) s[i] = '1';
  return s;
}

// "bits,energy" rows; bit i is character i of the bit string.
inline void write_samples(std::ostream& out, const SampleSet& set) {
  out << "bits,energy\n";
  char buf[64];
  for (const auto& s : set.samples) {
    std::snprintf(buf, sizeof buf, "%.9g", s.energy);
    out << bit_string(s.bits) << ',' << buf << '\n';
  }
}

struct AnnealOptions {
  std::size_t n_reads = 50;
  std::size_t sweeps = 1000;
  std::uint64_t seed = 0;
  // Inverse-temperature range; zeros select the range-based default schedule.
  double beta_start = 0.0;
  double beta_end = 0.0;
};

// Default schedule: T_hot = largest single-flip |dE| bound, T_cold = smallest
// nonzero coefficient magnitude / 10.
inline std::pair<double, double> default_beta_range(const QuboModel& model) {
  const auto n = static_cast<std::size_t>(model.variable_count());
  std::vector<double> bound(n, 0.0);
  double smallest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    bound[i] += std::abs(model.linear()[i]);
    if (model.linear()[i] != 0.0) smallest = std::min(smallest, std::abs(model.linear()[i]));
  }
  for (const auto& [ij, c] : model.quadratic()) {
    bound[static_cast<std::size_t>(ij.first)] += std::abs(c);
    bound[static_cast<std::size_t>(ij.second)] += std::abs(c);
    smallest = std::min(smallest, std::abs(c));
  }
  const double hot = bound.empty() ? 1.0 : *std::max_element(bound.begin(), bound.end());
  if (!(hot > 0.0) || !std::isfinite(smallest)) return {1.0, 1.0};
  // Coefficients below double resolution of the largest flip are rounding residue.
  if (smallest < 1e-12 * hot) {
    smallest = std::numeric_limits<double>::infinity();
    for (double h : model.linear())
      if (std::abs(h) >= 1e-12 * hot) smallest = std::min(smallest, std::abs(h));
    for (const auto& [ij, c] : model.quadratic())
      if (std::abs(c) >= 1e-12 * hot) smallest = std::min(smallest, std::abs(c));
  }
  return {1.0 / hot, 10.0 / smallest};
}

inline void sort_samples(std::vector<Sample>& samples) {
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
    if (a.energy != b.energy) return a.energy < b.energy;
    return a.bits < b.bits;
  });
}

// Independent single-bit-flip Metropolis chains under a geometric
// inverse-temperature schedule; the final state of each chain is one sample.
inline SampleSet anneal(const QuboModel& model, const AnnealOptions& opts = {}) {
  const int n = model.variable_count();
  if (n == 0) throw Error("cannot anneal an empty model");

  std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(n));
  for (const auto& [ij, c] : model.quadratic()) {
    adj[static_cast<std::size_t>(ij.first)].emplace_back(ij.second, c);
    adj[static_cast<std::size_t>(ij.second)].emplace_back(ij.first, c);
  }
  auto [beta0, beta1] = default_beta_range(model);
  if (opts.beta_start > 0.0) beta0 = opts.beta_start;
  if (opts.beta_end > 0.0) beta1 = opts.beta_end;
  const std::size_t sweeps = std::max<std::size_t>(opts.sweeps, 1);

  SampleSet set;
  set.n_reads = opts.n_reads;
  set.sweeps = sweeps;
  set.seed = opts.seed;
  set.samples.reserve(opts.n_reads);

  std::vector<double> field(static_cast<std::size_t>(n));
  for (std::size_t read = 0; read < opts.n_reads; ++read) {
    std::mt19937_64 rng(mix_seed(opts.seed, read));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Bits bits(static_cast<std::size_t>(n));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1U);
    // field[i] = energy change of turning bit i on.
    for (int i = 0; i < n; ++i) {
      double f = model.linear()[static_cast<std::size_t>(i)];
      for (const auto& [j, c] : adj[static_cast<std::size_t>(i)])
        if (bits[static_cast<std::size_t>(j)]) f += c;
      field[static_cast<std::size_t>(i)] = f;
    }
    for (std::size_t s = 0; s < sweeps; ++s) {
      const double frac = sweeps == 1 ? 1.0 : static_cast<double>(s) / static_cast<double>(sweeps - 1);
      const double beta = beta0 * std::pow(beta1 / beta0, frac);
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double de = bits[ui] ? -field[ui] : field[ui];
        if (de <= 0.0 || uni(rng) < std::exp(-beta * de)) {
          const double sign = bits[ui] ? -1.0 : 1.0;
          bits[ui] ^= 1U;
          for (const auto& [j, c] : adj[ui]) field[static_cast<std::size_t>(j)] += sign * c;
        }
      }
    }
    const double e = model.energy(bits);
    set.samples.push_back({std::move(bits), e});
  }
  sort_samples(set.samples);
  return set;
}

struct RefineOptions {
  int rounds = 4;
  int bits = 8;
  std::size_t n_reads = 10;
  std::size_t sweeps = 200;
  std::uint64_t seed = 0;
  double shrink = 0.5;
};

struct RefineRound {
  double best_energy;   // running minimum of |S x - rhs|^2
  double window_width;  // largest encoding range across variables
};

struct RefineResult {
  Eigen::VectorXd solution;
  std::vector<RefineRound> rounds;
};

// Initial window: +/- 2 |x_diag|_inf around zero with x_diag = rhs / diag(S).
inline FixedPointEncoding initial_refine_encoding(const LinearSystem& sys, int bits) {
  double half = 0.0;
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    const double d = sys.matrix(i, i);
    if (d != 0.0) half = std::max(half, std::abs(sys.rhs[i] / d));
  }
  half = half > 0.0 && std::isfinite(half) ? 2.0 * half : 1.0;
  const double scale = 2.0 * half / (std::ldexp(1.0, bits) - 1.0);
  return FixedPointEncoding(std::vector<VariableEncoding>(static_cast<std::size_t>(sys.size()), {-half, scale, bits, false}));
}

// Encode, anneal, then recenter every variable's window on the best value
// found so far and shrink it. A variable whose best value sits on the edge of
// its window grows instead, since the solution probably lies outside it.
inline RefineResult refine_solve(const LinearSystem& sys, const RefineOptions& opts = {}) {
  if (opts.rounds < 1) throw Error("refine_solve needs at least one round");
  FixedPointEncoding enc = initial_refine_encoding(sys, opts.bits);
  RefineResult result;
  double best = std::numeric_limits<double>::infinity();
  const double top = std::ldexp(1.0, opts.bits) - 1.0;
  const double center_index = std::ldexp(1.0, opts.bits - 1);

  for (int round = 0; round < opts.rounds; ++round) {
    const auto qubo = linear_system_to_qubo(sys, enc);
    AnnealOptions ao;
    ao.n_reads = opts.n_reads;
    ao.sweeps = opts.sweeps;
    ao.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(round));
    const auto samples = anneal(qubo.model, ao);
    const Eigen::VectorXd x = enc.decode(samples.best().bits);
    const double energy = (sys.matrix * x - sys.rhs).squaredNorm();
    if (energy < best || result.solution.size() == 0) {
      best = energy;
      result.solution = x;
    }
    double width = 0.0;
    for (const auto& v : enc.variables()) width = std::max(width, v.magnitude_max());
    result.rounds.push_back({best, width});

    std::vector<VariableEncoding> next;
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const auto& v = enc[i];
      const double index = (x[static_cast<Eigen::Index>(i)] - v.offset) / v.scale;
      const bool at_edge = index < 0.5 || index > top - 0.5;
      const double scale = at_edge ? v.scale / opts.shrink : v.scale * opts.shrink;
      next.push_back({result.solution[static_cast<Eigen::Index>(i)] - scale * center_index, scale, opts.bits, false});
    }
    enc = FixedPointEncoding(std::move(next));
  }
  return result;
}

struct QuboBackend {
  RefineOptions options{};

  LinearSolveResult operator()(const LinearSystem& sys, SolveContext ctx) const {
    auto opts = options;
    opts.seed = mix_seed(options.seed, ctx.seed);
    const auto solved = refine_solve(sys, opts);
    const double rhs2 = sys.rhs.squaredNorm();
    return {solved.solution,
            {{"best_energy", solved.rounds.back().best_energy},
             {"relative_residual", rhs2 > 0.0 ? std::sqrt(solved.rounds.back().best_energy / rhs2) : 0.0},
             {"final_window", solved.rounds.back().window_width}}};
  }
};

}  // namespace qwdn
