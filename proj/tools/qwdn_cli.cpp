#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qwdn/qwdn.hpp"

namespace fs = std::filesystem;
using namespace qwdn;

namespace {

enum Exit { ok = 0, other = 1, parse = 2, convergence = 3, io = 4 };

fs::path default_out_dir() {
  if (const char* env = std::getenv("QWDN_OUT_DIR"); env && *env) return env;
  return "out";
}

struct BackendFlags {
  std::string name = "classical";
  std::uint64_t seed = 0;
  int max_clock = 8;
};

// Calls f with a backend value of the type selected by name.
template <typename F>
decltype(auto) with_backend(const BackendFlags& flags, F&& f) {
  if (flags.name == "classical") return f(ClassicalBackend{});
  if (flags.name == "vqls") {
    VqlsBackend b;
    b.options.seed = flags.seed;
    return f(b);
  }
  if (flags.name == "hhl") {
    HhlBackend b;
    b.max_clock = flags.max_clock;
    return f(b);
  }
  if (flags.name == "qubols") {
    QuboBackend b;
    b.options.seed = flags.seed;
    return f(b);
  }
  throw Error("unknown backend '" + flags.name + "'");
}

const std::vector<std::string> kBackends{"classical", "vqls", "hhl", "qubols"};

int cmd_solve(const std::string& inp, const BackendFlags& flags, std::size_t max_iter, const std::string& log_path) {
  const Network net = resolve_network(inp);
  NrOptions opts;
  opts.seed = flags.seed;
  opts.max_iter = max_iter;
  const SolverReport rep = with_backend(flags, [&](auto backend) { return nr_solve(net, backend, opts); });

  std::cout << "converged," << (rep.converged ? 1 : 0) << "\niterations," << rep.iterations << "\nmass_residual,"
            << format_g9(rep.final_mass_residual) << "\nenergy_residual," << format_g9(rep.final_energy_residual) << "\n\n";
  const Eigen::VectorXd p = pressures(net, rep.state);
  std::cout << "junction,head,pressure\n";
  for (std::size_t j = 0; j < net.junction_count(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    std::cout << net.junctions()[j].id << ',' << format_g9(rep.state.h[k]) << ',' << format_g9(p[k]) << '\n';
  }
  std::cout << "\npipe,flow\n";
  for (std::size_t i = 0; i < net.pipe_count(); ++i)
    std::cout << net.pipes()[i].id << ',' << format_g9(rep.state.q[static_cast<Eigen::Index>(i)]) << '\n';

  if (!log_path.empty()) {
    auto f = open_output(log_path);
    write_iteration_log(f, rep);
    if (!f) throw IoError("write failed: " + log_path);
  }
  if (!rep.converged) {
    std::cerr << "error: Newton iteration did not converge\n";
    return convergence;
  }
  return ok;
}

struct StabilityFlags {
  std::string network = "two_loop";
  std::vector<std::string> vary;
  std::size_t count = ScenarioSpec{builtin_fixture(Fixture::zero_loop)}.count;
  std::uint64_t scenario_seed = 0;
  double low = 0.0, high = 0.0;
  std::size_t max_iter = 100;
  bool plot = false;
  std::string out;
};

int cmd_stability(const StabilityFlags& sf, const BackendFlags& flags) {
  const Network base = resolve_network(sf.network);
  const std::string tag = network_tag(sf.network);
  const bool custom_range = sf.low != 0.0 || sf.high != 0.0;
  if (custom_range && sf.vary.size() != 1) throw Error("--low/--high need exactly one --vary quantity");

  std::vector<StabilityRecord> records;
  std::ostringstream meta;
  meta << "network," << tag << "\nbackend," << flags.name << "\ncount," << sf.count << "\nscenario_seed," << sf.scenario_seed
       << "\nsolver_seed," << flags.seed << '\n';
  for (const auto& v : sf.vary) {
    const auto q = parse_quantity(v);
    if (!q) throw Error("unknown quantity '" + v + "'");
    ScenarioSpec spec{base, *q, custom_range ? Range{sf.low, sf.high} : default_range(*q), sf.count, sf.scenario_seed};
    StabilityOptions so;
    so.nr.seed = flags.seed;
    so.nr.max_iter = sf.max_iter;
    so.network_name = tag;
    so.backend_name = flags.name;
    auto part = with_backend(flags, [&](auto backend) { return run_stability(spec, backend, so); });
    records.insert(records.end(), part.begin(), part.end());
    meta << "range_" << v << ',' << format_g9(spec.range.low) << ',' << format_g9(spec.range.high) << '\n';
  }

  const fs::path dir = sf.out.empty() ? default_out_dir() : fs::path(sf.out);
  for (const auto& path : emit_outputs(records, dir, sf.plot)) std::cerr << "wrote " << path.string() << '\n';
  const fs::path meta_path = dir / ("stability_" + tag + "_" + flags.name + ".meta.csv");
  {
    auto f = open_output(meta_path);
    f << meta.str();
    if (!f) throw IoError("write failed: " + meta_path.string());
  }
  write_summary(std::cout, summarize(records));
  return ok;
}

struct QuboSimFlags {
  std::string network = "zero_loop";
  AnnealOptions anneal{};
  EncodingDefaults encoding{};
  std::string out;
};

int cmd_qubo_sim(const QuboSimFlags& qf) {
  const Network net = resolve_network(qf.network);
  const std::string tag = network_tag(qf.network);
  const auto spec = default_hydraulic_spec(net, qf.encoding);
  const auto reference = surrogate_reference(net);
  const auto result = simulate_direct(spec, qf.anneal);

  const fs::path dir = qf.out.empty() ? default_out_dir() : fs::path(qf.out);
  const fs::path path = dir / ("qubo_sim_" + tag + ".csv");
  {
    auto f = open_output(path);
    write_direct_records(f, direct_records(spec, result, reference.state));
    if (!f) throw IoError("write failed: " + path.string());
  }
  std::cerr << "wrote " << path.string() << '\n';

  std::cout << "original_variables," << result.original_variables << "\naux_variables," << result.aux_variables
            << "\nbest_energy," << format_g9(result.samples.best().energy) << "\nbest_objective,"
            << format_g9(result.best_objective) << "\nmax_relative_error,"
            << format_g9(state_relative_error(result.best, reference.state)) << "\nhead_relative_error,"
            << format_g9(head_relative_error(result.best, reference.state)) << "\n\nkind,element,value,reference\n";
  for (std::size_t p = 0; p < net.pipe_count(); ++p) {
    const auto k = static_cast<Eigen::Index>(p);
    std::cout << "flow," << net.pipes()[p].id << ',' << format_g9(result.best.q[k]) << ',' << format_g9(reference.state.q[k]) << '\n';
  }
  for (std::size_t j = 0; j < net.junction_count(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    std::cout << "head," << net.junctions()[j].id << ',' << format_g9(result.best.h[k]) << ',' << format_g9(reference.state.h[k])
              << '\n';
  }
  return ok;
}

struct LcdFlags {
  std::size_t runs = 20;
  AnnealOptions anneal = default_lcd_anneal();
  std::string out;
};

int cmd_lcd(const LcdFlags& lf) {
  const LcdSpec spec = default_lcd_spec();
  const auto rows = enumerate_lcd(spec);
  const auto optimum = lcd_optimum(rows);
  const auto results = run_lcd_study(spec, lf.anneal, lf.runs);

  const fs::path dir = lf.out.empty() ? default_out_dir() : fs::path(lf.out);
  {
    const fs::path path = dir / "lcd_enumeration.csv";
    auto f = open_output(path);
    f << "combination,cost,min_pressure_margin,feasible\n";
    for (const auto& r : rows) f << r.label << ',' << format_g9(r.cost) << ',' << format_g9(r.min_pressure_margin) << ',' << r.feasible << '\n';
    if (!f) throw IoError("write failed: " + path.string());
    std::cerr << "wrote " << path.string() << '\n';
  }
  std::vector<LcdRecord> finals;
  std::vector<std::pair<std::string, double>> points;
  for (std::size_t r = 0; r < results.size(); ++r) {
    finals.push_back({r, combination_label(spec, results[r].best_choice), results[r].best_energy});
    points.emplace_back(finals.back().label, finals.back().energy);
  }
  {
    const fs::path path = dir / "lcd_runs.csv";
    auto f = open_output(path);
    write_lcd_records(f, finals);
    if (!f) throw IoError("write failed: " + path.string());
    std::cerr << "wrote " << path.string() << '\n';
  }
  {
    const fs::path path = dir / "lcd_runs.svg";
    auto f = open_output(path);
    write_strip_svg(f, points, "final energy per run by diameter combination (mm)");
    if (!f) throw IoError("write failed: " + path.string());
    std::cerr << "wrote " << path.string() << '\n';
  }

  std::cout << "optimum," << (optimum.best ? optimum.best->label : std::string("none")) << "\nunique," << optimum.unique << '\n';
  std::size_t hits = 0;
  for (const auto& r : finals)
    if (optimum.best && r.label == optimum.best->label) ++hits;
  std::cout << "runs," << finals.size() << "\nruns_at_optimum," << hits << '\n';
  return ok;
}

int cmd_report(const std::string& csv, bool plot, const std::string& out) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw IoError("cannot read " + csv);
  const auto records = read_stability_csv(in);
  write_summary(std::cout, summarize(records));
  if (plot) {
    const fs::path dir = out.empty() ? fs::path(csv).parent_path() : fs::path(out);
    const fs::path path = dir / (fs::path(csv).stem().string() + ".svg");
    auto f = open_output(path);
    write_scatter_svg(f, records, fs::path(csv).stem().string());
    if (!f) throw IoError("write failed: " + path.string());
    std::cerr << "wrote " << path.string() << '\n';
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Newton-Raphson water network simulation with emulated quantum linear solvers"};
  app.require_subcommand(1);

  BackendFlags backend;
  auto add_backend = [&](CLI::App* sub) {
    sub->add_option("--backend", backend.name, "linear solver")->check(CLI::IsMember(kBackends));
    sub->add_option("--seed", backend.seed, "solver seed");
    sub->add_option("--max-clock", backend.max_clock, "HHL clock register cap")->check(CLI::Range(1, 18));
  };

  std::string inp, log_path;
  std::size_t max_iter = 100;
  auto* solve = app.add_subcommand("solve", "solve one network");
  solve->add_option("inp", inp, "INP file or fixture name (zero_loop, two_loop)")->required();
  add_backend(solve);
  solve->add_option("--max-iter", max_iter, "Newton iteration cap");
  solve->add_option("--log", log_path, "write the per-iteration log here");

  StabilityFlags sf;
  auto* stability = app.add_subcommand("stability", "compare a backend against the classical solver over random scenarios");
  stability->add_option("--network", sf.network, "fixture name or INP file");
  stability->add_option("--vary", sf.vary, "diameter, length, roughness or demand (repeatable)")->required();
  stability->add_option("--count", sf.count, "scenarios per quantity")->check(CLI::PositiveNumber);
  stability->add_option("--scenario-seed", sf.scenario_seed, "seed for scenario generation");
  stability->add_option("--low", sf.low, "lower bound of the sampling range");
  stability->add_option("--high", sf.high, "upper bound of the sampling range");
  stability->add_option("--max-iter", sf.max_iter, "Newton iteration cap");
  stability->add_flag("--plot", sf.plot, "also write a scatter plot");
  stability->add_option("--out", sf.out, "output directory (default $QWDN_OUT_DIR or ./out)");
  add_backend(stability);

  QuboSimFlags qf;
  auto* qubo_sim = app.add_subcommand("qubo-sim", "solve the hydraulics directly by annealing a binary polynomial");
  qubo_sim->add_option("--network", qf.network, "fixture name or INP file");
  qubo_sim->add_option("--reads", qf.anneal.n_reads, "annealing reads")->check(CLI::PositiveNumber);
  qubo_sim->add_option("--sweeps", qf.anneal.sweeps, "sweeps per read")->check(CLI::PositiveNumber);
  qubo_sim->add_option("--seed", qf.anneal.seed, "annealer seed");
  qubo_sim->add_option("--flow-bits", qf.encoding.flow_bits, "flow magnitude bits")->check(CLI::Range(1, 12));
  qubo_sim->add_option("--head-bits", qf.encoding.head_bits, "head bits")->check(CLI::Range(1, 12));
  qubo_sim->add_option("--out", qf.out, "output directory (default $QWDN_OUT_DIR or ./out)");

  LcdFlags lf;
  auto* lcd = app.add_subcommand("lcd", "least-cost design of the zero_loop network");
  lcd->add_option("--runs", lf.runs, "independent optimization runs")->check(CLI::PositiveNumber);
  lcd->add_option("--reads", lf.anneal.n_reads, "annealing reads per run")->check(CLI::PositiveNumber);
  lcd->add_option("--sweeps", lf.anneal.sweeps, "sweeps per read")->check(CLI::PositiveNumber);
  lcd->add_option("--seed", lf.anneal.seed, "seed of the first run");
  lcd->add_option("--out", lf.out, "output directory (default $QWDN_OUT_DIR or ./out)");

  std::string report_csv, report_out;
  bool report_plot = false;
  auto* report = app.add_subcommand("report", "summarize a stability table");
  report->add_option("table", report_csv, "stability CSV file")->required();
  report->add_flag("--plot", report_plot, "write a scatter plot next to the table");
  report->add_option("--out", report_out, "directory for the plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : Exit::parse;
  }

  try {
    if (*solve) return cmd_solve(inp, backend, max_iter, log_path);
    if (*stability) return cmd_stability(sf, backend);
    if (*qubo_sim) return cmd_qubo_sim(qf);
    if (*lcd) return cmd_lcd(lf);
    if (*report) return cmd_report(report_csv, report_plot, report_out);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return Exit::parse;
  } catch (const NetworkError& e) {
    std::cerr << "invalid network: " << e.what() << '\n';
    return Exit::parse;
  } catch (const BackendError& e) {
    std::cerr << "backend failure: " << e.what() << '\n';
    return convergence;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return convergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return other;
  }
  return other;
}
