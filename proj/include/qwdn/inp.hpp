#pragma once

// Reader and writer for the subset of the EPANET INP format that describes
// steady-state demand-driven networks: junctions, reservoirs and pipes with
// Hazen-Williams roughness.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qwdn/error.hpp"
#include "qwdn/network.hpp"

namespace qwdn {

namespace inp_detail {

struct Token {
  std::string text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ';') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < line.size() && line[i] != ';' && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({std::string(line.substr(start, i - start)), start + 1});
  }
  return out;
}

inline std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

inline double number(const Token& tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.text.data();
  const char* last = first + tok.text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ParseError(line, tok.column, "expected a number, got '" + tok.text + "'");
  return v;
}

// Conversion factors from INP units to SI for one flow-unit setting.
struct UnitSystem {
  double flow = 1.0;      // -> m^3/s
  double length = 1.0;    // elevation, head, pipe length -> m
  double diameter = 1.0;  // -> m
};

inline std::optional<UnitSystem> unit_system(const std::string& flow_units) {
  constexpr double ft = 0.3048;
  constexpr double inch = 0.0254;
  constexpr double mm = 0.001;
  constexpr double cfs = 0.028316846592;
  constexpr double gallon = 3.785411784e-3;
  constexpr double imperial_gallon = 4.54609e-3;
  constexpr double acre_foot = 1233.48183754752;
  constexpr double day = 86400.0;
  static const std::map<std::string, UnitSystem> table = {
      {"CFS", {cfs, ft, inch}},
      {"GPM", {gallon / 60.0, ft, inch}},
      {"MGD", {1e6 * gallon / day, ft, inch}},
      {"IMGD", {1e6 * imperial_gallon / day, ft, inch}},
      {"AFD", {acre_foot / day, ft, inch}},
      {"LPS", {1e-3, 1.0, mm}},
      {"LPM", {1e-3 / 60.0, 1.0, mm}},
      {"MLD", {1e3 / 86400.0, 1.0, mm}},
      {"CMH", {1.0 / 3600.0, 1.0, mm}},
      {"CMD", {1.0 / 86400.0, 1.0, mm}},
      {"CMS", {1.0, 1.0, mm}},
  };
  auto it = table.find(flow_units);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

struct RawPipe {
  Pipe pipe;
  std::size_t line;
  std::size_t start_col;
  std::size_t end_col;
};

}  // namespace inp_detail

inline Network parse_inp(std::string_view text) {
  using namespace inp_detail;

  enum class Section { none, title, junctions, reservoirs, pipes, demands, options, end };
  Section section = Section::none;
  bool saw_reservoirs = false;

  std::vector<Junction> junctions;
  std::vector<Reservoir> reservoirs;
  std::vector<RawPipe> pipes;
  std::map<std::string, double> demand_override;  // raw INP units
  std::vector<std::pair<std::string, std::size_t>> demand_refs;
  std::string flow_units = "GPM";
  std::vector<std::size_t> junction_lines, reservoir_lines;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size() && section != Section::end) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    auto toks = tokenize(line);
    if (toks.empty()) continue;

    if (toks[0].text.front() == '[') {
      const auto name = upper(toks[0].text);
      if (toks.size() > 1) throw ParseError(line_no, toks[1].column, "unexpected text after section header");
      if (name == "[TITLE]") section = Section::title;
      else if (name == "[JUNCTIONS]") section = Section::junctions;
      else if (name == "[RESERVOIRS]") {
        section = Section::reservoirs;
        saw_reservoirs = true;
      } else if (name == "[PIPES]") section = Section::pipes;
      else if (name == "[DEMANDS]") section = Section::demands;
      else if (name == "[OPTIONS]") section = Section::options;
      else if (name == "[END]") section = Section::end;
      else if (name == "[PUMPS]" || name == "[VALVES]" || name == "[TANKS]" || name == "[PATTERNS]")
        throw ParseError(line_no, toks[0].column, "unsupported section " + name + " (pumps, valves, tanks and patterns are not modelled)");
      else
        throw ParseError(line_no, toks[0].column, "unknown section " + name);
      continue;
    }

    auto need = [&](std::size_t n, const char* what) {
      if (toks.size() < n)
        throw ParseError(line_no, toks.back().column + toks.back().text.size(), std::string("expected ") + what);
    };

    switch (section) {
      case Section::none:
        throw ParseError(line_no, toks[0].column, "data outside of any section");
      case Section::title:
      case Section::end:
        break;
      case Section::junctions: {
        need(2, "junction id and elevation");
        Junction j{toks[0].text, number(toks[1], line_no), 0.0};
        if (toks.size() >= 3) j.base_demand = number(toks[2], line_no);
        if (j.base_demand < 0.0) throw ParseError(line_no, toks[2].column, "demand must be non-negative");
        if (toks.size() >= 4) throw ParseError(line_no, toks[3].column, "demand patterns are not supported");
        junctions.push_back(j);
        junction_lines.push_back(line_no);
        break;
      }
      case Section::reservoirs: {
        need(2, "reservoir id and head");
        if (toks.size() >= 3) throw ParseError(line_no, toks[2].column, "head patterns are not supported");
        reservoirs.push_back({toks[0].text, number(toks[1], line_no)});
        reservoir_lines.push_back(line_no);
        break;
      }
      case Section::pipes: {
        need(6, "pipe id, start node, end node, length, diameter and roughness");
        RawPipe rp{{toks[0].text, toks[1].text, toks[2].text, number(toks[3], line_no), number(toks[4], line_no),
                    number(toks[5], line_no)},
                   line_no, toks[1].column, toks[2].column};
        if (toks.size() >= 7 && number(toks[6], line_no) != 0.0)
          throw ParseError(line_no, toks[6].column, "minor losses are not supported");
        if (toks.size() >= 8 && upper(toks[7].text) != "OPEN")
          throw ParseError(line_no, toks[7].column, "only OPEN pipe status is supported");
        for (std::size_t k = 3; k <= 5; ++k)
          if (!(number(toks[k], line_no) > 0.0))
            throw ParseError(line_no, toks[k].column, "physical quantity must be positive");
        pipes.push_back(rp);
        break;
      }
      case Section::demands: {
        need(2, "junction id and demand");
        const double d = number(toks[1], line_no);
        if (d < 0.0) throw ParseError(line_no, toks[1].column, "demand must be non-negative");
        demand_override[toks[0].text] += d;
        demand_refs.emplace_back(toks[0].text, line_no);
        if (toks.size() >= 3)
          throw ParseError(line_no, toks[2].column, "demand patterns are not supported");
        break;
      }
      case Section::options: {
        const auto key = upper(toks[0].text);
        if (key == "UNITS") {
          need(2, "flow units");
          flow_units = upper(toks[1].text);
          if (!unit_system(flow_units)) throw ParseError(line_no, toks[1].column, "unknown flow units '" + toks[1].text + "'");
        } else if (key == "HEADLOSS") {
          need(2, "headloss formula");
          if (upper(toks[1].text) != "H-W")
            throw ParseError(line_no, toks[1].column, "only the H-W headloss formula is supported");
        }
        // Other options (trials, accuracy, ...) do not affect the model and are ignored.
        break;
      }
    }
  }

  if (!saw_reservoirs || reservoirs.empty()) throw ParseError(line_no == 0 ? 1 : line_no, 0, "no reservoir section");

  const auto units = *unit_system(flow_units);
  std::map<std::string, bool> node_ids;
  for (std::size_t i = 0; i < junctions.size(); ++i) {
    if (!node_ids.emplace(junctions[i].id, true).second)
      throw ParseError(junction_lines[i], 1, "duplicate node id '" + junctions[i].id + "'");
  }
  for (std::size_t i = 0; i < reservoirs.size(); ++i) {
    if (!node_ids.emplace(reservoirs[i].id, false).second)
      throw ParseError(reservoir_lines[i], 1, "duplicate node id '" + reservoirs[i].id + "'");
  }
  for (const auto& [id, line] : demand_refs) {
    auto it = node_ids.find(id);
    if (it == node_ids.end() || !it->second) throw ParseError(line, 1, "demand for unknown junction '" + id + "'");
  }
  for (const auto& rp : pipes) {
    if (!node_ids.count(rp.pipe.start_node))
      throw ParseError(rp.line, rp.start_col, "unknown node '" + rp.pipe.start_node + "'");
    if (!node_ids.count(rp.pipe.end_node)) throw ParseError(rp.line, rp.end_col, "unknown node '" + rp.pipe.end_node + "'");
  }

  for (auto& j : junctions) {
    if (auto it = demand_override.find(j.id); it != demand_override.end()) j.base_demand = it->second;
    j.elevation *= units.length;
    j.base_demand *= units.flow;
  }
  for (auto& r : reservoirs) r.head *= units.length;
  std::vector<Pipe> si_pipes;
  si_pipes.reserve(pipes.size());
  for (auto rp : pipes) {
    rp.pipe.length *= units.length;
    rp.pipe.diameter *= units.diameter;
    si_pipes.push_back(std::move(rp.pipe));
  }
  return Network(std::move(junctions), std::move(reservoirs), std::move(si_pipes));
}

// Emits the network in CMS units (m^3/s, m, diameters in mm) with
// round-trip precision.
inline std::string serialize_inp(const Network& net) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "[JUNCTIONS]\n;ID\tElevation\tDemand\n";
  for (const auto& j : net.junctions()) out << j.id << '\t' << num(j.elevation) << '\t' << num(j.base_demand) << '\n';
  out << "\n[RESERVOIRS]\n;ID\tHead\n";
  for (const auto& r : net.reservoirs()) out << r.id << '\t' << num(r.head) << '\n';
  out << "\n[PIPES]\n;ID\tNode1\tNode2\tLength\tDiameter\tRoughness\n";
  for (const auto& p : net.pipes())
    out << p.id << '\t' << p.start_node << '\t' << p.end_node << '\t' << num(p.length) << '\t' << num(p.diameter * 1000.0)
        << '\t' << num(p.roughness) << '\n';
  out << "\n[OPTIONS]\nUNITS\tCMS\nHEADLOSS\tH-W\n\n[END]\n";
  return out.str();
}

inline Network load_inp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream text;
  text << f.rdbuf();
  if (f.bad()) throw IoError("read failed: " + path.string());
  return parse_inp(text.str());
}

}  // namespace qwdn
