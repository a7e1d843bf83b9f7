#pragma once

#include "blocknav/envgraph.hpp"
#include "blocknav/worldgen.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <tuple>
#include <vector>

namespace testing {

using blocknav::EnvGraph;
using blocknav::NodeId;

struct E {
  NodeId from;
  NodeId to;
  double angle;
};

inline EnvGraph make_graph(std::size_t n, const std::vector<E>& edges, std::size_t bins = 8,
                           std::size_t dim = 1) {
  EnvGraph::Builder b(bins, dim);
  for (std::size_t i = 0; i < n; ++i) b.add_node(std::vector<double>(bins * dim, 0.0));
  for (const E& e : edges) b.add_edge(e.from, e.to, e.angle);
  return std::move(b).build();
}

/// Nodes 0..n-1 from west to east, two-way.
inline EnvGraph path_graph(std::size_t n) {
  std::vector<E> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    edges.push_back({NodeId(i), NodeId(i + 1), 90.0});
    edges.push_back({NodeId(i + 1), NodeId(i), -90.0});
  }
  return make_graph(n, edges);
}

inline EnvGraph full_grid(std::size_t w, std::size_t h, std::uint64_t seed = 1) {
  blocknav::WorldParams p;
  p.seed = seed;
  p.grid_w = w;
  p.grid_h = h;
  p.edge_keep_prob = 1.0;
  return blocknav::generate_world(p);
}

inline blocknav::WorldParams random_world_params(std::uint64_t seed) {
  blocknav::WorldParams p;
  p.seed = seed;
  p.grid_w = 3 + seed % 5;
  p.grid_h = 3 + (seed / 5) % 4;
  p.edge_keep_prob = 0.55 + 0.1 * static_cast<double>(seed % 5);
  p.landmark_vocab_size = 4 + seed % 5;
  return p;
}

// --- oracles ------------------------------------------------------------------------

/// Shortest hops by repeated edge relaxation (no queue).
inline std::optional<std::size_t> relaxation_hops(const EnvGraph& g, NodeId u, NodeId v) {
  const std::size_t inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> d(g.node_count(), inf);
  d[std::size_t(u)] = 0;
  for (std::size_t round = 0; round < g.node_count(); ++round) {
    bool changed = false;
    for (std::size_t a = 0; a < g.node_count(); ++a) {
      if (d[a] == inf) continue;
      for (const auto& e : g.out_edges(NodeId(a))) {
        if (d[a] + 1 < d[std::size_t(e.to)]) {
          d[std::size_t(e.to)] = d[a] + 1;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  if (d[std::size_t(v)] == inf) return std::nullopt;
  return d[std::size_t(v)];
}

inline std::size_t recursive_edit_distance(const std::vector<NodeId>& a, std::size_t i, const std::vector<NodeId>& b,
                                           std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  if (a[i] == b[j]) return recursive_edit_distance(a, i + 1, b, j + 1);
  return 1 + std::min({recursive_edit_distance(a, i + 1, b, j), recursive_edit_distance(a, i, b, j + 1),
                       recursive_edit_distance(a, i + 1, b, j + 1)});
}

/// Walks a two-way street graph without the block index: on a node with two
/// streets keep going along the one that is not the way back.
struct WalkOracle {
  const EnvGraph& g;

  bool intersection(NodeId n) const { return g.out_edges(n).size() != 2; }

  /// Steps from `n`, leaving along `angle`, until an intersection is reached.
  std::size_t steps_to_intersection(NodeId n, double angle) const {
    std::size_t steps = 0;
    NodeId prev = n;
    NodeId cur = -1;
    for (const auto& e : g.out_edges(n)) {
      if (e.angle_deg == angle) cur = e.to;
    }
    ++steps;
    while (!intersection(cur) && steps <= g.node_count()) {
      const auto out = g.out_edges(cur);
      const NodeId next = out[0].to == prev ? out[1].to : out[0].to;
      prev = cur;
      cur = next;
      ++steps;
    }
    return steps;
  }

  /// N_step / N_all for an agent standing on `n` facing `angle` before
  /// moving.
  double label(NodeId n, double angle) const {
    const std::size_t ahead = steps_to_intersection(n, angle);
    if (intersection(n)) return 1.0;
    double back_angle = 0;
    for (const auto& e : g.out_edges(n)) {
      if (e.angle_deg != angle) back_angle = e.angle_deg;
    }
    const std::size_t behind = steps_to_intersection(n, back_angle);
    return static_cast<double>(ahead) / static_cast<double>(ahead + behind);
  }
};

/// Streets between intersections, counted by merging undirected edges that
/// meet at a node with exactly two streets.
inline std::size_t count_streets(const EnvGraph& g) {
  std::vector<std::pair<NodeId, NodeId>> undirected;
  for (std::size_t a = 0; a < g.node_count(); ++a) {
    for (const auto& e : g.out_edges(NodeId(a))) {
      if (NodeId(a) < e.to) undirected.emplace_back(NodeId(a), e.to);
    }
  }
  std::vector<std::size_t> parent(undirected.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    if (g.out_edges(NodeId(v)).size() != 2) continue;
    std::vector<std::size_t> touching;
    for (std::size_t i = 0; i < undirected.size(); ++i) {
      if (undirected[i].first == NodeId(v) || undirected[i].second == NodeId(v)) touching.push_back(i);
    }
    for (std::size_t i = 1; i < touching.size(); ++i) parent[find(touching[i])] = find(touching[0]);
  }
  std::size_t roots = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) roots += find(i) == i ? 1 : 0;
  return roots;
}

} // namespace testing
