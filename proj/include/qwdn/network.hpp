#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qwdn/error.hpp"

namespace qwdn {

struct Junction {
  std::string id;
  double elevation = 0.0;    // m
  double base_demand = 0.0;  // m^3/s
};

struct Reservoir {
  std::string id;
  double head = 0.0;  // m
};

struct Pipe {
  std::string id;
  std::string start_node;
  std::string end_node;
  double length = 0.0;     // m
  double diameter = 0.0;   // m
  double roughness = 0.0;  // Hazen-Williams C
};

enum class NodeKind { junction, reservoir };

struct NodeRef {
  NodeKind kind;
  std::size_t index;

  bool operator==(const NodeRef&) const = default;
};

// Immutable water distribution network. The constructor enforces every
// structural invariant, so any Network value in the program is valid.
class Network {
public:
  Network(std::vector<Junction> junctions, std::vector<Reservoir> reservoirs, std::vector<Pipe> pipes)
      : junctions_(std::move(junctions)), reservoirs_(std::move(reservoirs)), pipes_(std::move(pipes)) {
    validate();
  }

  const std::vector<Junction>& junctions() const noexcept { return junctions_; }
  const std::vector<Reservoir>& reservoirs() const noexcept { return reservoirs_; }
  const std::vector<Pipe>& pipes() const noexcept { return pipes_; }

  std::size_t junction_count() const noexcept { return junctions_.size(); }
  std::size_t reservoir_count() const noexcept { return reservoirs_.size(); }
  std::size_t pipe_count() const noexcept { return pipes_.size(); }
  std::size_t node_count() const noexcept { return junctions_.size() + reservoirs_.size(); }

  std::optional<NodeRef> find_node(const std::string& id) const {
    auto it = node_index_.find(id);
    if (it == node_index_.end()) return std::nullopt;
    return it->second;
  }

  NodeRef pipe_start(std::size_t p) const { return pipe_ends_[p].first; }
  NodeRef pipe_end(std::size_t p) const { return pipe_ends_[p].second; }

  Eigen::VectorXd demands() const {
    Eigen::VectorXd d(junctions_.size());
    for (std::size_t j = 0; j < junctions_.size(); ++j) d[j] = junctions_[j].base_demand;
    return d;
  }

  Eigen::VectorXd reservoir_heads() const {
    Eigen::VectorXd h(reservoirs_.size());
    for (std::size_t r = 0; r < reservoirs_.size(); ++r) h[r] = reservoirs_[r].head;
    return h;
  }

  Eigen::VectorXd elevations() const {
    Eigen::VectorXd z(junctions_.size());
    for (std::size_t j = 0; j < junctions_.size(); ++j) z[j] = junctions_[j].elevation;
    return z;
  }

  // Number of independent loops: pipes - nodes + 1 for a connected graph.
  std::size_t loop_count() const noexcept { return pipes_.size() + 1 - node_count(); }

private:
  void validate() {
    if (reservoirs_.empty()) throw NetworkError("network has no reservoir");
    if (junctions_.empty()) throw NetworkError("network has no junction");

    auto add_node = [this](const std::string& id, NodeRef ref) {
      if (id.empty()) throw NetworkError("empty node id");
      if (!node_index_.emplace(id, ref).second) throw NetworkError("duplicate node id '" + id + "'");
    };
    for (std::size_t j = 0; j < junctions_.size(); ++j) {
      add_node(junctions_[j].id, {NodeKind::junction, j});
      const auto& jn = junctions_[j];
      if (!std::isfinite(jn.elevation)) throw NetworkError("junction '" + jn.id + "': non-finite elevation");
      if (!(jn.base_demand >= 0.0) || !std::isfinite(jn.base_demand))
        throw NetworkError("junction '" + jn.id + "': demand must be >= 0");
    }
    for (std::size_t r = 0; r < reservoirs_.size(); ++r) {
      add_node(reservoirs_[r].id, {NodeKind::reservoir, r});
      if (!std::isfinite(reservoirs_[r].head))
        throw NetworkError("reservoir '" + reservoirs_[r].id + "': non-finite head");
    }

    std::unordered_map<std::string, bool> pipe_ids;
    pipe_ends_.reserve(pipes_.size());
    for (const auto& p : pipes_) {
      if (p.id.empty()) throw NetworkError("empty pipe id");
      if (!pipe_ids.emplace(p.id, true).second) throw NetworkError("duplicate pipe id '" + p.id + "'");
      auto s = find_node(p.start_node);
      auto e = find_node(p.end_node);
      if (!s) throw NetworkError("pipe '" + p.id + "': unknown node '" + p.start_node + "'");
      if (!e) throw NetworkError("pipe '" + p.id + "': unknown node '" + p.end_node + "'");
      if (*s == *e) throw NetworkError("pipe '" + p.id + "': start and end node coincide");
      if (!(p.length > 0.0) || !(p.diameter > 0.0) || !(p.roughness > 0.0))
        throw NetworkError("pipe '" + p.id + "': length, diameter and roughness must be > 0");
      pipe_ends_.emplace_back(*s, *e);
    }
    check_connected();
  }

  // Breadth-first search from all reservoirs; every junction must be reached.
  void check_connected() const {
    const std::size_t nj = junctions_.size();
    std::vector<std::vector<std::size_t>> adj(nj);
    std::vector<bool> seen(nj, false);
    std::queue<std::size_t> frontier;
    for (const auto& [s, e] : pipe_ends_) {
      if (s.kind == NodeKind::junction && e.kind == NodeKind::junction) {
        adj[s.index].push_back(e.index);
        adj[e.index].push_back(s.index);
      } else if (s.kind == NodeKind::junction || e.kind == NodeKind::junction) {
        std::size_t j = s.kind == NodeKind::junction ? s.index : e.index;
        if (!seen[j]) {
          seen[j] = true;
          frontier.push(j);
        }
      }
    }
    while (!frontier.empty()) {
      auto j = frontier.front();
      frontier.pop();
      for (auto k : adj[j]) {
        if (!seen[k]) {
          seen[k] = true;
          frontier.push(k);
        }
      }
    }
    for (std::size_t j = 0; j < nj; ++j) {
      if (!seen[j]) throw NetworkError("network is disconnected: junction '" + junctions_[j].id + "' unreachable from any reservoir");
    }
  }

  std::vector<Junction> junctions_;
  std::vector<Reservoir> reservoirs_;
  std::vector<Pipe> pipes_;
  std::unordered_map<std::string, NodeRef> node_index_;
  std::vector<std::pair<NodeRef, NodeRef>> pipe_ends_;
};

// Signed pipe-node incidence split into the junction (unknown head) and
// reservoir (fixed head) blocks. -1 at the pipe start node, +1 at its end.
struct IncidenceDecomposition {
  Eigen::MatrixXd a12;  // pipes x junctions
  Eigen::MatrixXd a10;  // pipes x reservoirs
  Eigen::MatrixXd a21;  // junctions x pipes, a12 transposed
};

inline IncidenceDecomposition incidence(const Network& net) {
  const auto np = static_cast<Eigen::Index>(net.pipe_count());
  IncidenceDecomposition inc;
  inc.a12 = Eigen::MatrixXd::Zero(np, static_cast<Eigen::Index>(net.junction_count()));
  inc.a10 = Eigen::MatrixXd::Zero(np, static_cast<Eigen::Index>(net.reservoir_count()));
  auto mark = [&](Eigen::Index p, NodeRef n, double sign) {
    auto col = static_cast<Eigen::Index>(n.index);
    if (n.kind == NodeKind::junction)
      inc.a12(p, col) = sign;
    else
      inc.a10(p, col) = sign;
  };
  for (Eigen::Index p = 0; p < np; ++p) {
    mark(p, net.pipe_start(static_cast<std::size_t>(p)), -1.0);
    mark(p, net.pipe_end(static_cast<std::size_t>(p)), +1.0);
  }
  inc.a21 = inc.a12.transpose();
  return inc;
}

}  // namespace qwdn
