#include "blocknav/worldgen.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace blocknav {
namespace {

struct GridEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double angle_ab = 0.0; // heading from a to b
};

class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

private:
  std::vector<std::size_t> parent_;
};

double opposite(double angle) {
  return wrap_degrees(angle + 180.0);
}

bool strongly_connected(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  auto reach = [&](const std::vector<std::vector<std::size_t>>& a) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : a[u]) {
        if (!seen[v]) {
          seen[v] = true;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  std::vector<std::vector<std::size_t>> rev(n);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v : adj[u]) rev[v].push_back(u);
  }
  return reach(adj) && reach(rev);
}

} // namespace

std::size_t min_feature_dim(std::size_t landmark_vocab_size) {
  return 1 + 2 * landmark_vocab_size;
}

EnvGraph generate_world(const WorldParams& p) {
  if (p.grid_w == 0 || p.grid_h == 0) throw GenerationFailed("grid dimensions must be positive");
  if (!(p.edge_keep_prob > 0.0 && p.edge_keep_prob <= 1.0)) {
    throw GenerationFailed("edge_keep_prob must lie in (0, 1]");
  }
  if (p.landmark_vocab_size == 0) throw GenerationFailed("landmark_vocab_size must be positive");
  if (p.bins == 0) throw GenerationFailed("bins must be positive");
  const std::size_t dim = p.d_v == 0 ? min_feature_dim(p.landmark_vocab_size) : p.d_v;
  if (dim < min_feature_dim(p.landmark_vocab_size)) {
    throw GenerationFailed("d_v " + std::to_string(dim) + " is below the minimum " +
                           std::to_string(min_feature_dim(p.landmark_vocab_size)));
  }

  rng::Engine eng(p.seed);
  const std::size_t w = p.grid_w;
  const std::size_t h = p.grid_h;
  const std::size_t n = w * h;

  std::vector<GridEdge> all;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t id = y * w + x;
      if (x + 1 < w) all.push_back({id, id + 1, 90.0});
      if (y + 1 < h) all.push_back({id, id + w, 0.0});
    }
  }

  std::vector<GridEdge> kept;
  std::vector<GridEdge> dropped;
  for (const GridEdge& e : all) {
    (rng::bernoulli(eng, p.edge_keep_prob) ? kept : dropped).push_back(e);
  }

  UnionFind uf(n);
  for (const GridEdge& e : kept) uf.unite(e.a, e.b);
  rng::shuffle(dropped, eng);
  for (const GridEdge& e : dropped) {
    if (uf.unite(e.a, e.b)) kept.push_back(e);
  }

  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<std::vector<Edge>> out(n);
  for (const GridEdge& e : kept) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
    out[e.a].push_back(Edge{static_cast<NodeId>(e.b), e.angle_ab});
    out[e.b].push_back(Edge{static_cast<NodeId>(e.a), opposite(e.angle_ab)});
  }
  if (!strongly_connected(adj)) throw GenerationFailed("repair did not produce a strongly connected graph");

  std::vector<int> landmark(n);
  for (auto& l : landmark) l = static_cast<int>(rng::uniform_index(eng, p.landmark_vocab_size));

  const std::size_t V = p.landmark_vocab_size;
  EnvGraph::Builder builder(p.bins, dim);
  for (std::size_t u = 0; u < n; ++u) {
    std::vector<double> f(p.bins * dim, 0.0);
    for (const Edge& e : out[u]) {
      const std::size_t row = heading_bin(e.angle_deg, p.bins) * dim;
      f[row] = 1.0;
      f[row + 1 + static_cast<std::size_t>(landmark[static_cast<std::size_t>(e.to)])] = 1.0;
    }
    for (std::size_t b = 0; b < p.bins; ++b) f[b * dim + 1 + V + static_cast<std::size_t>(landmark[u])] = 1.0;
    if (p.feature_noise_sigma > 0.0) {
      for (double& v : f) v += p.feature_noise_sigma * rng::normal(eng);
    }
    builder.add_node(std::move(f), landmark[u]);
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (const Edge& e : out[u]) builder.add_edge(static_cast<NodeId>(u), e.to, e.angle_deg);
  }
  return std::move(builder).build();
}

namespace {

constexpr std::size_t kRouteAttempts = 256;
constexpr double kStraightTolerance = 45.0;

std::optional<Route> try_route(const EnvGraph& g, rng::Engine& eng, std::size_t blocks, std::size_t max_actions) {
  const NodeId start = static_cast<NodeId>(rng::uniform_index(eng, g.node_count()));
  const auto start_edges = g.out_edges(start);
  if (start_edges.empty()) return std::nullopt;

  Route r;
  r.initial_heading = start_edges[rng::uniform_index(eng, start_edges.size())].angle_deg;
  AgentState state = initial_state(g, start, r.initial_heading);
  r.path.push_back(start);
  std::set<NodeId> visited{start};
  const BlockIndex& idx = g.blocks();

  for (std::size_t b = 0; b < blocks; ++b) {
    const bool last = b + 1 == blocks;
    Leg leg;
    leg.first_step = r.actions.size();

    // Forward states up to the end of the faced block, or up to a revisit.
    std::vector<AgentState> walk;
    AgentState cur = state;
    bool reached_terminal = false;
    while (true) {
      const auto next = step(g, cur, Action::Forward);
      if (visited.count(next->node) || std::any_of(walk.begin(), walk.end(), [&](const AgentState& s) {
            return s.node == next->node;
          })) {
        break;
      }
      walk.push_back(*next);
      cur = *next;
      if (idx.is_terminal(cur.node)) {
        reached_terminal = true;
        break;
      }
    }
    if (walk.empty()) return std::nullopt;

    if (last) {
      // Prefer a stopping node whose landmark is not seen earlier on the leg.
      std::vector<std::size_t> distinct;
      for (std::size_t k = 0; k < walk.size(); ++k) {
        bool unique = true;
        for (std::size_t j = 0; j < k; ++j) unique = unique && g.landmark(walk[j].node) != g.landmark(walk[k].node);
        if (unique) distinct.push_back(k);
      }
      const std::size_t stop_at = distinct[rng::uniform_index(eng, distinct.size())];
      for (std::size_t k = 0; k <= stop_at; ++k) {
        r.actions.push_back(Action::Forward);
        r.path.push_back(walk[k].node);
      }
      leg.kind = LegKind::Final;
      leg.last_step = r.actions.size() - 1;
      leg.end_node = walk[stop_at].node;
      r.legs.push_back(leg);
      r.actions.push_back(Action::Stop);
      break;
    }

    if (!reached_terminal) return std::nullopt;
    for (const AgentState& s : walk) {
      r.actions.push_back(Action::Forward);
      r.path.push_back(s.node);
      visited.insert(s.node);
    }
    state = walk.back();
    const NodeId came_from = walk.size() >= 2 ? walk[walk.size() - 2].node : r.path[r.path.size() - 2];

    const auto edges = g.out_edges(state.node);
    std::vector<std::size_t> options;
    for (std::size_t s = 0; s < edges.size(); ++s) {
      if (edges[s].to != came_from && !visited.count(edges[s].to)) options.push_back(s);
    }
    if (options.empty()) return std::nullopt;
    const std::size_t target = options[rng::uniform_index(eng, options.size())];
    const double arrival = state.prev_heading;
    const double turn = wrap_degrees(edges[target].angle_deg - arrival);
    leg.kind = std::abs(turn) <= kStraightTolerance ? LegKind::Straight : turn < 0 ? LegKind::Left : LegKind::Right;

    const std::size_t n = edges.size();
    const std::size_t current = *g.edge_slot(state.node, state.heading);
    const std::size_t lefts = (current + n - target) % n;
    const std::size_t rights = (target + n - current) % n;
    const bool go_left = lefts < rights || (lefts == rights && turn < 0);
    const Action rot = go_left ? Action::Left : Action::Right;
    for (std::size_t k = 0; k < (go_left ? lefts : rights); ++k) {
      r.actions.push_back(rot);
      state = *step(g, state, rot);
    }
    leg.last_step = r.actions.size() - 1;
    leg.end_node = state.node;
    r.legs.push_back(leg);
  }

  if (max_actions > 0 && r.actions.size() > max_actions) return std::nullopt;
  return r;
}

} // namespace

Route generate_route(const EnvGraph& graph, std::uint64_t seed, std::size_t min_blocks, std::size_t max_blocks,
                     std::size_t max_actions) {
  if (min_blocks == 0 || max_blocks < min_blocks) {
    throw RouteFailed("invalid block span " + std::to_string(min_blocks) + ".." + std::to_string(max_blocks));
  }
  rng::Engine eng(seed);
  for (std::size_t attempt = 0; attempt < kRouteAttempts; ++attempt) {
    const std::size_t blocks = static_cast<std::size_t>(
        rng::uniform_int(eng, static_cast<int>(min_blocks), static_cast<int>(max_blocks)));
    if (auto r = try_route(graph, eng, blocks, max_actions)) return *std::move(r);
  }
  throw RouteFailed("no route spanning " + std::to_string(min_blocks) + ".." + std::to_string(max_blocks) +
                    " blocks found after " + std::to_string(kRouteAttempts) + " attempts");
}

} // namespace blocknav
