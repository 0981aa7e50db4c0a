// Enumerates the nine diameter combinations of the design fixture under the
// shipped cost table and pressure floor. Exit status 0 iff (0.5 m, 0.5 m) is
// the unique feasible least-cost combination.

#include <cstdio>

#include "qwdn/hydraulic_qubo.hpp"

int main() {
  using namespace qwdn;
  const LcdSpec spec = default_lcd_spec();
  const auto rows = enumerate_lcd(spec);
  std::printf("H_min %.9g m, unit costs", spec.min_pressure);
  for (std::size_t c = 0; c < spec.candidate_count(); ++c) std::printf(" %.9g m:%.9g", spec.diameters[c], spec.unit_costs[c]);
  std::printf("\n%-12s %12s %14s %s\n", "combination", "cost", "margin_m", "feasible");
  for (const auto& r : rows) std::printf("%-12s %12.9g %14.9g %s\n", r.label.c_str(), r.cost, r.min_pressure_margin, r.feasible ? "yes" : "no");
  const auto opt = lcd_optimum(rows);
  if (!opt.best) {
    std::printf("no feasible combination\n");
    return 1;
  }
  std::printf("optimum %s cost %.9g %s\n", opt.best->label.c_str(), opt.best->cost, opt.unique ? "unique" : "tied");
  return opt.best->label == "500_500" && opt.unique ? 0 : 1;
}
