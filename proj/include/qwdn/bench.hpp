#pragma once

// Stability sweeps: random perturbations of a base network, solved by the
// classical reference and by a backend, compared junction by junction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/gga.hpp"
#include "qwdn/network.hpp"

namespace qwdn {

enum class Quantity { diameter, length, roughness, demand };

inline std::string_view quantity_name(Quantity q) {
  switch (q) {
    case Quantity::diameter: return "diameter";
    case Quantity::length: return "length";
    case Quantity::roughness: return "roughness";
    case Quantity::demand: return "demand";
  }
  return "?";
}

inline std::optional<Quantity> parse_quantity(std::string_view s) {
  for (auto q : {Quantity::diameter, Quantity::length, Quantity::roughness, Quantity::demand})
    if (quantity_name(q) == s) return q;
  return std::nullopt;
}

struct Range {
  double low = 0.0;
  double high = 1.0;
};

// SI units: m, m, Hazen-Williams C, m^3/s.
inline Range default_range(Quantity q) {
  switch (q) {
    case Quantity::diameter: return {0.15, 0.5};
    case Quantity::length: return {200.0, 1200.0};
    case Quantity::roughness: return {70.0, 140.0};
    case Quantity::demand: return {0.005, 0.05};
  }
  return {};
}

struct ScenarioSpec {
  Network base;
  Quantity varied = Quantity::diameter;
  Range range = default_range(Quantity::diameter);
  std::size_t count = 500;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(range.low < range.high)) throw Error("scenario range needs low < high");
    if (count < 1) throw Error("scenario count must be at least 1");
  }
};

// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double unit_uniform(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Scenario i draws its values from a stream seeded by mix_seed(seed, i).
inline std::vector<Network> generate_scenarios(const ScenarioSpec& spec) {
  spec.validate();
  std::vector<Network> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    std::uint64_t state = mix_seed(spec.seed, i);
    auto draw = [&] {
      state = mix_seed(state, 0);
      return spec.range.low + unit_uniform(state) * (spec.range.high - spec.range.low);
    };
    auto junctions = spec.base.junctions();
    auto pipes = spec.base.pipes();
    switch (spec.varied) {
      case Quantity::diameter:
        for (auto& p : pipes) p.diameter = draw();
        break;
      case Quantity::length:
        for (auto& p : pipes) p.length = draw();
        break;
      case Quantity::roughness:
        for (auto& p : pipes) p.roughness = draw();
        break;
      case Quantity::demand:
        for (auto& j : junctions) j.base_demand = draw();
        break;
    }
    out.emplace_back(std::move(junctions), spec.base.reservoirs(), std::move(pipes));
  }
  return out;
}

inline constexpr std::size_t kCiScenarioCount = 50;

inline constexpr double kRelativeErrorFloor = 1e-9;

inline double relative_error(double value, double reference) {
  return std::abs(value - reference) / std::max(std::abs(reference), kRelativeErrorFloor);
}

struct StabilityRecord {
  std::string network;
  std::string backend;
  std::string varied;
  std::size_t scenario_id = 0;
  std::string node_id;
  double reference_pressure = 0.0;
  double solver_pressure = 0.0;
  double relative_error = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

struct StabilityOptions {
  NrOptions nr{};
  std::string network_name = "network";
  std::string backend_name = "backend";
};

// One record per junction per scenario. Each scenario gets a fresh copy of
// the backend and its own seed; failures become non-converged records.
template <LinearSolverBackend Backend>
std::vector<StabilityRecord> run_stability(const ScenarioSpec& spec, const Backend& backend, const StabilityOptions& opts = {}) {
  const auto scenarios = generate_scenarios(spec);
  std::vector<StabilityRecord> records;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const Network& net = scenarios[s];
    const auto ref = nr_solve(net, ClassicalBackend{}, NrOptions{opts.nr.tol_mass, opts.nr.tol_energy, opts.nr.max_iter, 0, opts.nr.model});
    if (!ref.converged)
      throw NumericalError("reference solve failed for " + opts.network_name + " scenario " + std::to_string(s));
    const Eigen::VectorXd ref_p = pressures(net, ref.state);

    NrOptions o = opts.nr;
    o.seed = mix_seed(opts.nr.seed, s);
    Backend b = backend;
    std::optional<SolverReport> rep;
    std::size_t failed_at = 0;
    try {
      rep = nr_solve(net, b, o);
    } catch (const BackendError& e) {
      failed_at = e.iteration();
    } catch (const NumericalError&) {
    }
    const Eigen::VectorXd sol_p = rep ? pressures(net, rep->state)
                                      : Eigen::VectorXd::Constant(ref_p.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < net.junction_count(); ++j) {
      StabilityRecord r;
      r.network = opts.network_name;
      r.backend = opts.backend_name;
      r.varied = std::string(quantity_name(spec.varied));
      r.scenario_id = s;
      r.node_id = net.junctions()[j].id;
      r.reference_pressure = ref_p[static_cast<Eigen::Index>(j)];
      r.solver_pressure = sol_p[static_cast<Eigen::Index>(j)];
      r.relative_error = std::isfinite(r.solver_pressure) ? relative_error(r.solver_pressure, r.reference_pressure)
                                                         : std::numeric_limits<double>::infinity();
      r.converged = rep && rep->converged;
      r.iterations = rep ? rep->iterations : failed_at;
      records.push_back(std::move(r));
    }
  }
  return records;
}

inline constexpr double kTolerance = 0.10;

struct StabilitySummary {
  std::size_t records = 0;
  double fraction_within_10pct = 0.0;  // converged and within tolerance, over all records
  double median_rel_error = 0.0;  // over converged records
  std::size_t outlier_count = 0;  // converged records beyond tolerance
  std::size_t nonconverged_count = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline StabilitySummary summarize_group(const std::vector<StabilityRecord>& records) {
  if (records.empty()) throw Error("cannot summarize an empty record set");
  StabilitySummary s;
  s.records = records.size();
  std::vector<double> errors;
  std::size_t within = 0;
  for (const auto& r : records) {
    if (!r.converged) {
      ++s.nonconverged_count;
      continue;
    }
    errors.push_back(r.relative_error);
    if (r.relative_error <= kTolerance)
      ++within;
    else
      ++s.outlier_count;
  }
  s.fraction_within_10pct = static_cast<double>(within) / static_cast<double>(records.size());
  s.median_rel_error = median(std::move(errors));
  return s;
}

// Aggregates per backend tag.
inline std::map<std::string, StabilitySummary> summarize(const std::vector<StabilityRecord>& records) {
  if (records.empty()) throw Error("cannot summarize an empty record set");
  std::map<std::string, std::vector<StabilityRecord>> groups;
  for (const auto& r : records) groups[r.backend].push_back(r);
  std::map<std::string, StabilitySummary> out;
  for (const auto& [tag, group] : groups) out.emplace(tag, summarize_group(group));
  return out;
}

// ---------------------------------------------------------------------------
// Tabular text

inline std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline constexpr std::string_view kStabilityHeader =
    "network,backend,varied,scenario_id,node_id,reference_pressure,solver_pressure,relative_error,converged,iterations";

inline void write_stability_csv(std::ostream& out, const std::vector<StabilityRecord>& records) {
  out << kStabilityHeader << '\n';
  for (const auto& r : records) {
    out << r.network << ',' << r.backend << ',' << r.varied << ',' << r.scenario_id << ',' << r.node_id << ','
        << format_g9(r.reference_pressure) << ',' << format_g9(r.solver_pressure) << ',' << format_g9(r.relative_error) << ','
        << (r.converged ? 1 : 0) << ',' << r.iterations << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_double_cell(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError(line, 0, "bad number '" + s + "'");
  return v;
}

inline std::vector<StabilityRecord> read_stability_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kStabilityHeader) throw ParseError(1, 1, "not a stability table (header mismatch)");
  std::vector<StabilityRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 10) throw ParseError(n, 1, "expected 10 columns, found " + std::to_string(c.size()));
    StabilityRecord r;
    r.network = c[0];
    r.backend = c[1];
    r.varied = c[2];
    r.scenario_id = static_cast<std::size_t>(parse_double_cell(c[3], n));
    r.node_id = c[4];
    r.reference_pressure = parse_double_cell(c[5], n);
    r.solver_pressure = parse_double_cell(c[6], n);
    r.relative_error = parse_double_cell(c[7], n);
    if (c[8] != "0" && c[8] != "1") throw ParseError(n, 9, "converged must be 0 or 1");
    r.converged = c[8] == "1";
    r.iterations = static_cast<std::size_t>(parse_double_cell(c[9], n));
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_summary(std::ostream& out, const std::map<std::string, StabilitySummary>& s) {
  out << "backend,records,fraction_within_10pct,median_rel_error,outlier_count,nonconverged_count\n";
  for (const auto& [tag, v] : s)
    out << tag << ',' << v.records << ',' << format_g9(v.fraction_within_10pct) << ',' << format_g9(v.median_rel_error) << ','
        << v.outlier_count << ',' << v.nonconverged_count << '\n';
}

// ---------------------------------------------------------------------------
// SVG plots

namespace svg {

struct Frame {
  double x0, x1, y0, y1;  // data bounds
  double width = 480, height = 480, margin = 56;

  double px(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
  double py(double y) const { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); }
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void open(std::ostream& out, const Frame& f, std::string_view title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(f.width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  out << "<rect x=\"" << num(f.margin) << "\" y=\"" << num(f.margin) << "\" width=\"" << num(f.width - 2 * f.margin)
      << "\" height=\"" << num(f.height - 2 * f.margin) << "\" fill=\"none\" stroke=\"black\"/>\n";
}

inline void axis_labels(std::ostream& out, const Frame& f, std::string_view xl, std::string_view yl) {
  out << "<text x=\"" << num(f.width / 2) << "\" y=\"" << num(f.height - 12) << "\" text-anchor=\"middle\">" << xl << "</text>\n";
  out << "<text transform=\"translate(14," << num(f.height / 2) << ") rotate(-90)\" text-anchor=\"middle\">" << yl << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x=\"" << num(f.px(x)) << "\" y=\"" << num(f.height - f.margin + 14) << "\" text-anchor=\"middle\">"
        << format_g9(std::round(x * 100) / 100) << "</text>\n";
    out << "<text x=\"" << num(f.margin - 4) << "\" y=\"" << num(f.py(y) + 4) << "\" text-anchor=\"end\">"
        << format_g9(std::round(y * 100) / 100) << "</text>\n";
  }
}

}  // namespace svg

// Reference against solver pressure with the identity line and a +/-10% band.
// Non-converged records are drawn as hollow markers.
inline void write_scatter_svg(std::ostream& out, const std::vector<StabilityRecord>& records, std::string_view title) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : records) {
    for (double v : {r.reference_pressure, r.solver_pressure})
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  svg::Frame f{lo - pad, hi + pad, lo - pad, hi + pad};
  svg::open(out, f, title);
  out << "<clipPath id=\"plot\"><rect x=\"" << svg::num(f.margin) << "\" y=\"" << svg::num(f.margin) << "\" width=\""
      << svg::num(f.width - 2 * f.margin) << "\" height=\"" << svg::num(f.height - 2 * f.margin) << "\"/></clipPath>\n";
  out << "<g clip-path=\"url(#plot)\">\n";
  out << "<polygon fill=\"#dde8f4\" points=\"" << svg::num(f.px(f.x0)) << ',' << svg::num(f.py(f.x0 * 1.1)) << ' '
      << svg::num(f.px(f.x1)) << ',' << svg::num(f.py(f.x1 * 1.1)) << ' ' << svg::num(f.px(f.x1)) << ','
      << svg::num(f.py(f.x1 * 0.9)) << ' ' << svg::num(f.px(f.x0)) << ',' << svg::num(f.py(f.x0 * 0.9)) << "\"/>\n";
  out << "<line x1=\"" << svg::num(f.px(f.x0)) << "\" y1=\"" << svg::num(f.py(f.x0)) << "\" x2=\"" << svg::num(f.px(f.x1))
      << "\" y2=\"" << svg::num(f.py(f.x1)) << "\" stroke=\"gray\"/>\n";
  for (const auto& r : records) {
    if (!std::isfinite(r.solver_pressure)) continue;
    out << "<circle cx=\"" << svg::num(f.px(r.reference_pressure)) << "\" cy=\"" << svg::num(f.py(r.solver_pressure))
        << "\" r=\"2.5\" " << (r.converged ? "fill=\"#1f5fa8\"" : "fill=\"none\" stroke=\"#c0392b\"") << "/>\n";
  }
  out << "</g>\n";
  svg::axis_labels(out, f, "reference pressure (m)", "solver pressure (m)");
  out << "</svg>\n";
}

// Energy of each sample against its category label, one column per label in first-seen order.
inline void write_strip_svg(std::ostream& out, const std::vector<std::pair<std::string, double>>& points, std::string_view title) {
  std::vector<std::string> labels;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [label, e] : points) {
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  if (labels.empty()) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  svg::Frame f{0.0, static_cast<double>(std::max<std::size_t>(labels.size(), 1)), lo - pad, hi + pad, 640, 400, 64};
  svg::open(out, f, title);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << "<text x=\"" << svg::num(f.px(i + 0.5)) << "\" y=\"" << svg::num(f.height - f.margin + 14) << "\" text-anchor=\"middle\">"
        << labels[i] << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = f.y0 + (f.y1 - f.y0) * i / 4.0;
    out << "<text x=\"" << svg::num(f.margin - 4) << "\" y=\"" << svg::num(f.py(y) + 4) << "\" text-anchor=\"end\">" << format_g9(y)
        << "</text>\n";
  }
  for (const auto& [label, e] : points) {
    const auto i = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
    out << "<circle cx=\"" << svg::num(f.px(i + 0.5)) << "\" cy=\"" << svg::num(f.py(e)) << "\" r=\"2.5\" fill=\"#1f5fa8\" fill-opacity=\"0.5\"/>\n";
  }
  out << "<text x=\"" << svg::num(f.width / 2) << "\" y=\"" << svg::num(f.height - 12) << "\" text-anchor=\"middle\">pipe diameters (mm)</text>\n";
  out << "<text transform=\"translate(14," << svg::num(f.height / 2) << ") rotate(-90)\" text-anchor=\"middle\">energy</text>\n";
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Files

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

// One table (and optionally one scatter plot) per network and backend:
// <dir>/stability_<network>_<backend>.csv / .svg. Returns the paths written.
inline std::vector<std::filesystem::path> emit_outputs(const std::vector<StabilityRecord>& records, const std::filesystem::path& dir,
                                                       bool plot) {
  std::map<std::pair<std::string, std::string>, std::vector<StabilityRecord>> groups;
  for (const auto& r : records) groups[{r.network, r.backend}].push_back(r);
  std::vector<std::filesystem::path> written;
  for (const auto& [key, group] : groups) {
    const std::string stem = "stability_" + key.first + "_" + key.second;
    {
      auto path = dir / (stem + ".csv");
      auto f = open_output(path);
      write_stability_csv(f, group);
      if (!f) throw IoError("write failed: " + path.string());
      written.push_back(path);
    }
    if (plot) {
      auto path = dir / (stem + ".svg");
      auto f = open_output(path);
      write_scatter_svg(f, group, key.first + " / " + key.second);
      if (!f) throw IoError("write failed: " + path.string());
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace qwdn
