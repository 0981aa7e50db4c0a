#pragma once

// Built-in copies of the fixture networks shipped under data/. The test
// suite checks that these strings and the files stay identical.

#include <optional>
#include <string>
#include <string_view>

#include "qwdn/inp.hpp"
#include "qwdn/network.hpp"

namespace qwdn {

enum class Fixture { zero_loop, two_loop };

inline constexpr std::string_view zero_loop_inp = R"INP([TITLE]
Zero-loop network: one reservoir feeding two junctions in series.
Used for the least-cost design experiment (candidate diameters 250, 500, 1000 mm).

[JUNCTIONS]
;ID   Elevation(m)  Demand(L/s)
J1    10            50
J2    15            100

[RESERVOIRS]
;ID   Head(m)
R1    100

[PIPES]
;ID   Node1  Node2  Length(m)  Diameter(mm)  Roughness(C)
P1    R1     J1     1000       400           130
P2    J1     J2     1000       300           130

[OPTIONS]
UNITS     LPS
HEADLOSS  H-W

[END]
)INP";

inline constexpr std::string_view two_loop_inp = R"INP([TITLE]
Two-loop network: 7 nodes, 8 pipes, 2 loops (Alperovits-Shamir layout).
Elevations, demands, lengths and roughness follow the classic benchmark;
diameters are fixed stand-ins in the middle of the commercial range.

[JUNCTIONS]
;ID  Elevation(m)  Demand(m3/h)
2    150           100
3    160           100
4    155           120
5    150           270
6    165           330
7    160           200

[RESERVOIRS]
;ID  Head(m)
1    210

[PIPES]
;ID  Node1  Node2  Length(m)  Diameter(mm)  Roughness(C)
1    1      2      1000       450           130
2    2      3      1000       300           130
3    2      4      1000       400           130
4    4      5      1000       200           130
5    4      6      1000       400           130
6    6      7      1000       250           130
7    3      5      1000       300           130
8    7      5      1000       150           130

[OPTIONS]
UNITS     CMH
HEADLOSS  H-W

[END]
)INP";

inline std::string_view fixture_text(Fixture f) { return f == Fixture::zero_loop ? zero_loop_inp : two_loop_inp; }

inline Network builtin_fixture(Fixture f) { return parse_inp(fixture_text(f)); }

inline const char* fixture_name(Fixture f) { return f == Fixture::zero_loop ? "zero_loop" : "two_loop"; }

inline std::optional<Fixture> parse_fixture(std::string_view name) {
  if (name == "zero_loop") return Fixture::zero_loop;
  if (name == "two_loop") return Fixture::two_loop;
  return std::nullopt;
}

// A fixture name or a path to an INP file.
inline Network resolve_network(const std::string& name_or_path) {
  if (auto f = parse_fixture(name_or_path)) return builtin_fixture(*f);
  return load_inp(name_or_path);
}

// Tag used in output file names: the fixture name or the file stem.
inline std::string network_tag(const std::string& name_or_path) {
  if (parse_fixture(name_or_path)) return name_or_path;
  return std::filesystem::path(name_or_path).stem().string();
}

}  // namespace qwdn
