#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "qwdn/fixtures.hpp"
#include "qwdn/hydraulic_qubo.hpp"

using namespace qwdn;

namespace {

Bits random_bits(std::mt19937_64& rng, int n) {
  Bits b(static_cast<std::size_t>(n));
  for (auto& x : b) x = rng() & 1U;
  return b;
}

Bits bits_of(std::uint64_t v, int n) {
  Bits b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) b[static_cast<std::size_t>(i)] = (v >> i) & 1U;
  return b;
}

// Weighted squared residuals of the surrogate equations, computed from the
// network directly rather than through the polynomial builder.
double independent_objective(const HydraulicQuboSpec& spec, const HydraulicState& s) {
  const auto& net = spec.network;
  double e2 = 0.0, c2 = 0.0;
  auto head = [&](NodeRef n) {
    return n.kind == NodeKind::junction ? s.h[static_cast<Eigen::Index>(n.index)] : net.reservoirs()[n.index].head;
  };
  Eigen::VectorXd balance = -net.demands();
  for (std::size_t p = 0; p < net.pipe_count(); ++p) {
    const double q = s.q[static_cast<Eigen::Index>(p)];
    const double r = hazen_williams_resistance(net.pipes()[p]);
    const double e = r * q * std::abs(q) - head(net.pipe_start(p)) + head(net.pipe_end(p));
    e2 += e * e;
    if (net.pipe_start(p).kind == NodeKind::junction) balance[static_cast<Eigen::Index>(net.pipe_start(p).index)] -= q;
    if (net.pipe_end(p).kind == NodeKind::junction) balance[static_cast<Eigen::Index>(net.pipe_end(p).index)] += q;
  }
  c2 = balance.squaredNorm();
  return spec.w_energy * e2 + spec.w_continuity * c2;
}

HydraulicQuboSpec coarse_zero_loop() {
  EncodingDefaults d;
  d.flow_bits = 3;
  d.head_bits = 3;
  return default_hydraulic_spec(builtin_fixture(Fixture::zero_loop), d);
}

}  // namespace

TEST(HydraulicQubo, PolynomialMatchesIndependentObjective) {
  std::mt19937_64 rng(2);
  for (auto f : {Fixture::zero_loop, Fixture::two_loop}) {
    const auto spec = default_hydraulic_spec(builtin_fixture(f));
    const auto poly = build_hydraulic_polynomial(spec);
    EXPECT_LE(poly.degree(), 6);
    const int n = spec.encoding().end_bit();
    for (int trial = 0; trial < 200; ++trial) {
      const auto bits = random_bits(rng, n);
      const auto state = decode_state(spec, bits);
      const double ref = independent_objective(spec, state);
      EXPECT_NEAR(poly.evaluate(bits), ref, 1e-9 * std::max(1.0, ref));
      EXPECT_NEAR(hydraulic_objective(spec, state), ref, 1e-9 * std::max(1.0, ref));
    }
  }
}

TEST(HydraulicQubo, ZeroLoopDegreeIsFour) {
  // (2s - 1)^2 = 1 removes the sign bit from the squared energy residual.
  const auto poly = build_hydraulic_polynomial(default_hydraulic_spec(builtin_fixture(Fixture::zero_loop)));
  EXPECT_EQ(poly.degree(), 4);
}

TEST(HydraulicQubo, CoarseBruteForceNearSurrogate) {
  const auto spec = coarse_zero_loop();
  const auto poly = build_hydraulic_polynomial(spec);
  const int n = spec.encoding().end_bit();
  ASSERT_EQ(n, 14);
  double best = std::numeric_limits<double>::infinity();
  Bits arg;
  for (std::uint64_t v = 0; v < (1u << n); ++v) {
    const auto b = bits_of(v, n);
    const double e = poly.evaluate(b);
    if (e < best) {
      best = e;
      arg = b;
    }
  }
  const auto s = decode_state(spec, arg);
  const auto ref = surrogate_reference(spec.network).state;
  for (Eigen::Index p = 0; p < s.q.size(); ++p) EXPECT_LE(std::abs(s.q[p] - ref.q[p]), spec.flows[0].scale + 1e-12);
  for (Eigen::Index j = 0; j < s.h.size(); ++j) EXPECT_LE(std::abs(s.h[j] - ref.h[j]), spec.heads[0].scale + 1e-12);
}

// Consistent auxiliaries reproduce the polynomial on every assignment.
TEST(HydraulicQubo, QuadratizedModelAgreesOnConsistentAssignments) {
  const auto spec = coarse_zero_loop();
  const auto poly = build_hydraulic_polynomial(spec);
  const int n = spec.encoding().end_bit();
  const auto quad = quadratize(poly, kDesignPenalty, n);
  std::mt19937_64 rng(5);
  for (std::uint64_t v = 0; v < (1u << n); ++v) {
    const auto b = bits_of(v, n);
    const double p = poly.evaluate(b);
    auto full = quad.extend(b);
    EXPECT_NEAR(quad.model.energy(full), p, 1e-9 * std::max(1.0, std::abs(p)));
    if (quad.aux_count > 0 && v % 64 == 0) {
      const auto k = static_cast<std::size_t>(n) + rng() % static_cast<std::size_t>(quad.aux_count);
      full[k] ^= 1U;
      if (!quad.consistent(full)) EXPECT_GT(quad.model.energy(full), p);
    }
  }
}

TEST(HydraulicQubo, SinglePipeDemandRecovered) {
  const Network net({{"J1", 0.0, 0.06}}, {{"R1", 30.0}}, {{"P1", "R1", "J1", 300.0, 0.3, 120.0}});
  // One flow quantum of continuity error weighs as much as one metre of head error.
  HydraulicQuboSpec spec{net, {{0.0, 0.02, 3, true}}, {{20.0, 1.0, 4, false}}, 1.0, 1.0 / (0.02 * 0.02)};
  const auto poly = build_hydraulic_polynomial(spec);
  const int n = spec.encoding().end_bit();
  double best = std::numeric_limits<double>::infinity();
  Bits arg;
  for (std::uint64_t v = 0; v < (1u << n); ++v) {
    const double e = poly.evaluate(bits_of(v, n));
    if (e < best) {
      best = e;
      arg = bits_of(v, n);
    }
  }
  EXPECT_NEAR(decode_state(spec, arg).q[0], 0.06, 1e-12);
}

TEST(HydraulicQubo, ZeroDemandFlatHeadsAreExact) {
  const Network net({{"J1", 0.0, 0.0}, {"J2", 0.0, 0.0}}, {{"R1", 30.0}},
                    {{"P1", "R1", "J1", 300.0, 0.3, 120.0}, {"P2", "J1", "J2", 300.0, 0.3, 120.0}});
  HydraulicQuboSpec spec{net, {{0.0, 0.01, 2, true}, {0.0, 0.01, 2, true}}, {{28.0, 1.0, 3, false}, {28.0, 1.0, 3, false}}, 1.0, 1.0};
  const auto enc = spec.encoding();
  Bits b(static_cast<std::size_t>(enc.end_bit()), 0);
  enc.encode(2, 30.0, b);
  enc.encode(3, 30.0, b);
  EXPECT_DOUBLE_EQ(build_hydraulic_polynomial(spec).evaluate(b), 0.0);
}

TEST(HydraulicQubo, SpecValidation) {
  auto spec = default_hydraulic_spec(builtin_fixture(Fixture::zero_loop));
  spec.flows.pop_back();
  EXPECT_THROW(spec.validate(), Error);
  spec = default_hydraulic_spec(builtin_fixture(Fixture::zero_loop));
  spec.w_energy = 0.0;
  EXPECT_THROW(spec.validate(), Error);
  spec = default_hydraulic_spec(builtin_fixture(Fixture::zero_loop));
  spec.heads[0].is_signed = true;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(DirectSimulation, ZeroLoopHeadsWithinTenPercent) {
  const auto spec = default_hydraulic_spec(builtin_fixture(Fixture::zero_loop));
  const auto r = simulate_direct(spec);
  const auto ref = surrogate_reference(spec.network).state;
  EXPECT_LE(head_relative_error(r.best, ref), 0.10);
  EXPECT_EQ(r.original_variables, 20);
  EXPECT_GT(r.aux_variables, 0);
  EXPECT_EQ(r.samples.samples.size(), 50u);
}

TEST(DirectSimulation, DeterministicRecords) {
  const auto spec = default_hydraulic_spec(builtin_fixture(Fixture::zero_loop));
  AnnealOptions o;
  o.n_reads = 10;
  o.sweeps = 200;
  o.seed = 3;
  const auto ref = surrogate_reference(spec.network).state;
  std::ostringstream a, b;
  write_direct_records(a, direct_records(spec, simulate_direct(spec, o), ref));
  write_direct_records(b, direct_records(spec, simulate_direct(spec, o), ref));
  const std::string text = a.str();
  EXPECT_EQ(text, b.str());
  EXPECT_EQ(text.rfind("sample,energy,kind,element,value,reference\n", 0), 0u);
  // 10 samples x (2 flows + 2 heads) rows plus header
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 41);
}

TEST(Lcd, EnumerationOracle) {
  const auto spec = default_lcd_spec();
  const auto rows = enumerate_lcd(spec);
  ASSERT_EQ(rows.size(), 9u);
  const auto opt = lcd_optimum(rows);
  ASSERT_TRUE(opt.best.has_value());
  EXPECT_EQ(opt.best->label, "500_500");
  EXPECT_TRUE(opt.unique);
  EXPECT_DOUBLE_EQ(opt.best->cost, 4000.0);
  for (const auto& r : rows) {
    if (r.label.find("250") != std::string::npos) EXPECT_FALSE(r.feasible) << r.label;
    EXPECT_EQ(r.feasible, r.min_pressure_margin >= 0.0);
  }
}

TEST(Lcd, LabelsAndChoiceDecoding) {
  const auto spec = default_lcd_spec();
  EXPECT_EQ(combination_label(spec, {1, 2}), "500_1000");
  Bits b(static_cast<std::size_t>(spec.encoding().end_bit()), 0);
  EXPECT_FALSE(decode_choice(spec, b).has_value());
  b[static_cast<std::size_t>(spec.choice_bit(0, 1))] = 1;
  b[static_cast<std::size_t>(spec.choice_bit(1, 0))] = 1;
  ASSERT_TRUE(decode_choice(spec, b).has_value());
  EXPECT_EQ(*decode_choice(spec, b), (std::vector<std::size_t>{1, 0}));
  b[static_cast<std::size_t>(spec.choice_bit(1, 2))] = 1;
  EXPECT_FALSE(decode_choice(spec, b).has_value());
}

TEST(Lcd, SingleCandidateCost) {
  const Network net = builtin_fixture(Fixture::zero_loop);
  const auto spec = make_lcd_spec(net, {0.5}, {2.0}, 80.0);
  EXPECT_EQ(spec.choice_bits(), 2);
  EXPECT_DOUBLE_EQ(installation_cost(spec, {0, 0}), 2.0 * 2000.0);
  EXPECT_THROW(make_lcd_spec(net, {0.5}, {-1.0}, 80.0), Error);
  EXPECT_THROW(make_lcd_spec(net, {}, {}, 80.0), Error);
}

namespace {

// Bits for a diameter choice with flows, heads and slacks at the surrogate solution.
Bits consistent_bits(const LcdSpec& spec, const std::vector<std::size_t>& choice) {
  const auto enc = spec.encoding();
  Bits b(static_cast<std::size_t>(enc.end_bit()), 0);
  for (std::size_t p = 0; p < choice.size(); ++p) b[static_cast<std::size_t>(spec.choice_bit(p, choice[p]))] = 1;
  const Network net = with_diameters(spec.network, chosen_diameters(spec, choice));
  const auto s = surrogate_reference(net).state;
  const std::size_t np = net.pipe_count(), nj = net.junction_count();
  for (std::size_t p = 0; p < np; ++p) enc.encode(p, s.q[static_cast<Eigen::Index>(p)], b);
  for (std::size_t j = 0; j < nj; ++j) {
    enc.encode(np + j, s.h[static_cast<Eigen::Index>(j)], b);
    const double h = enc.decode(np + j, b);
    enc.encode(np + nj + j, h - net.junctions()[j].elevation - spec.min_pressure, b);
  }
  return b;
}

}  // namespace

TEST(Lcd, OneHotViolationCostsAtLeastPenalty) {
  const auto spec = default_lcd_spec();
  const auto poly = build_lcd_polynomial(spec);
  for (std::size_t c0 = 0; c0 < 3; ++c0)
    for (std::size_t c1 = 0; c1 < 3; ++c1) {
      const auto b = consistent_bits(spec, {c0, c1});
      const double base = poly.evaluate(b);
      // The extra pipe changes r, which may shave off whatever hydraulic and
      // pressure residual the lattice point carries, but never more.
      const double residual = base - installation_cost(spec, {c0, c1});
      ASSERT_GE(residual, 0.0);
      for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t extra = 0; extra < 3; ++extra) {
          if (extra == (p == 0 ? c0 : c1)) continue;
          auto v = b;
          v[static_cast<std::size_t>(spec.choice_bit(p, extra))] = 1;
          EXPECT_GE(poly.evaluate(v) - base, spec.p_onehot - residual);
          EXPECT_GT(poly.evaluate(v), spec.p_onehot);
        }
    }
}

// With the hydraulics satisfied, energy ranks feasible combinations by cost.
TEST(Lcd, EnergyOrderingFollowsCost) {
  const auto spec = default_lcd_spec();
  const auto poly = build_lcd_polynomial(spec);
  std::vector<std::pair<double, double>> cost_energy;
  for (const auto& row : enumerate_lcd(spec))
    if (row.feasible) cost_energy.emplace_back(row.cost, poly.evaluate(consistent_bits(spec, row.choice)));
  ASSERT_EQ(cost_energy.size(), 4u);
  for (const auto& a : cost_energy)
    for (const auto& b : cost_energy)
      if (a.first < b.first) EXPECT_LT(a.second, b.second);
}

TEST(Lcd, DefaultSpecUsesDocumentedPenalties) {
  const auto spec = default_lcd_spec();
  EXPECT_DOUBLE_EQ(spec.p_hyd, 2000.0 * 8.0);
  EXPECT_DOUBLE_EQ(spec.p_press, spec.p_hyd);
  EXPECT_DOUBLE_EQ(spec.p_onehot, 10.0 * spec.p_hyd);
  EXPECT_EQ(spec.slacks[0].n_bits, kSlackBits);
  EXPECT_DOUBLE_EQ(spec.slacks[0].scale, spec.heads[0].scale);
}

TEST(Lcd, RecordsFormat) {
  const auto spec = default_lcd_spec();
  AnnealOptions o;
  o.n_reads = 200;
  o.sweeps = 20;
  const auto r = optimize_lcd(spec, o);
  const auto rows = lcd_records(spec, r, 3);
  EXPECT_EQ(rows.size(), 200u);
  std::ostringstream out;
  write_lcd_records(out, rows);
  EXPECT_EQ(out.str().rfind("run,combination,energy\n3,", 0), 0u);
}
