#include "blocknav/envgraph.hpp"

#include "blocknav/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace blocknav {
namespace {

constexpr double kAngleTol = 1e-9;

bool same_angle(double a, double b) {
  return std::abs(wrap_degrees(a - b)) <= kAngleTol;
}

void require_node(const EnvGraph& g, NodeId n) {
  if (!g.contains(n)) throw UnknownNode("unknown node " + std::to_string(n));
}

} // namespace

std::string_view to_string(Action a) {
  switch (a) {
  case Action::Forward: return "FORWARD";
  case Action::Left: return "LEFT";
  case Action::Right: return "RIGHT";
  case Action::Stop: return "STOP";
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view s) {
  for (Action a : kAllActions) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

double wrap_degrees(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

std::size_t heading_bin(double heading, std::size_t bins) {
  const double width = 360.0 / static_cast<double>(bins);
  const long b = std::lround(heading / width);
  const long n = static_cast<long>(bins);
  return static_cast<std::size_t>(((b % n) + n) % n);
}

double normalize_heading_delta(double prev_heading, double heading) {
  return wrap_degrees(heading - prev_heading) / 180.0;
}

double long_term_angle(std::span<const double> g_history, std::size_t t, std::size_t K) {
  double sum = 0.0;
  for (std::size_t k = 0; k <= K && k <= t; ++k) sum += g_history[t - k];
  return sum;
}

// --- EnvGraph ---------------------------------------------------------------

EnvGraph::Builder::Builder(std::size_t bins, std::size_t feature_dim)
    : bins_(bins), feature_dim_(feature_dim) {}

NodeId EnvGraph::Builder::add_node(std::vector<double> features, int landmark) {
  features_.push_back(std::move(features));
  landmarks_.push_back(landmark);
  out_.emplace_back();
  return static_cast<NodeId>(out_.size() - 1);
}

void EnvGraph::Builder::add_edge(NodeId from, NodeId to, double angle_deg) {
  if (from < 0 || static_cast<std::size_t>(from) >= out_.size()) {
    throw MalformedGraph("edge from unknown node " + std::to_string(from));
  }
  out_[static_cast<std::size_t>(from)].push_back(Edge{to, angle_deg});
}

EnvGraph EnvGraph::Builder::build() && {
  if (bins_ == 0) throw MalformedGraph("heading bin count must be positive");
  const std::size_t n = out_.size();
  for (std::size_t u = 0; u < n; ++u) {
    if (features_[u].size() != bins_ * feature_dim_) {
      throw MalformedGraph("node " + std::to_string(u) + ": expected " + std::to_string(bins_) + "x" +
                           std::to_string(feature_dim_) + " features, got " +
                           std::to_string(features_[u].size()) + " values");
    }
    auto& edges = out_[u];
    for (const Edge& e : edges) {
      if (!(e.angle_deg > -180.0 && e.angle_deg <= 180.0)) {
        throw MalformedGraph("node " + std::to_string(u) + ": edge angle " + std::to_string(e.angle_deg) +
                             " outside (-180, 180]");
      }
      if (e.to < 0 || static_cast<std::size_t>(e.to) >= n) {
        throw MalformedGraph("node " + std::to_string(u) + ": edge to unknown node " + std::to_string(e.to));
      }
    }
    std::stable_sort(edges.begin(), edges.end(),
                     [](const Edge& a, const Edge& b) { return a.angle_deg < b.angle_deg; });
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (edges[i].angle_deg == edges[i - 1].angle_deg) {
        throw MalformedGraph("node " + std::to_string(u) + ": duplicate edge angle " +
                             std::to_string(edges[i].angle_deg));
      }
    }
  }

  EnvGraph g;
  g.bins_ = bins_;
  g.feature_dim_ = feature_dim_;
  g.features_ = std::move(features_);
  g.landmarks_ = std::move(landmarks_);
  g.out_ = std::move(out_);
  g.blocks_ = segment_blocks(g);
  return g;
}

std::size_t EnvGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& e : out_) total += e.size();
  return total;
}

std::span<const Edge> EnvGraph::out_edges(NodeId n) const {
  require_node(*this, n);
  return out_[static_cast<std::size_t>(n)];
}

std::span<const double> EnvGraph::features(NodeId n) const {
  require_node(*this, n);
  return features_[static_cast<std::size_t>(n)];
}

int EnvGraph::landmark(NodeId n) const {
  require_node(*this, n);
  return landmarks_[static_cast<std::size_t>(n)];
}

bool EnvGraph::has_edge(NodeId from, NodeId to) const {
  if (!contains(from)) return false;
  const auto& edges = out_[static_cast<std::size_t>(from)];
  return std::any_of(edges.begin(), edges.end(), [to](const Edge& e) { return e.to == to; });
}

std::optional<std::size_t> EnvGraph::edge_slot(NodeId n, double heading) const {
  const auto edges = out_edges(n);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (same_angle(edges[i].angle_deg, heading)) return i;
  }
  return std::nullopt;
}

std::vector<double> EnvGraph::observation(NodeId n, double heading) const {
  const auto feats = features(n);
  std::vector<double> obs(feats.size());
  const std::size_t base = heading_bin(heading, bins_);
  for (std::size_t k = 0; k < bins_; ++k) {
    const std::size_t src = (base + k) % bins_;
    std::copy_n(feats.begin() + static_cast<std::ptrdiff_t>(src * feature_dim_), feature_dim_,
                obs.begin() + static_cast<std::ptrdiff_t>(k * feature_dim_));
  }
  return obs;
}

// --- dynamics -----------------------------------------------------------------

double forward_heading(const EnvGraph& graph, NodeId node, double arrival_heading) {
  const auto edges = graph.out_edges(node);
  if (edges.empty()) return arrival_heading;
  double best = edges.front().angle_deg;
  double best_diff = std::abs(wrap_degrees(best - arrival_heading));
  for (const Edge& e : edges.subspan(1)) {
    const double diff = std::abs(wrap_degrees(e.angle_deg - arrival_heading));
    if (diff < best_diff - kAngleTol) {
      best = e.angle_deg;
      best_diff = diff;
    }
  }
  return best;
}

AgentState initial_state(const EnvGraph& graph, NodeId node, double heading) {
  require_node(graph, node);
  const auto edges = graph.out_edges(node);
  AgentState s;
  s.node = node;
  if (!edges.empty()) {
    const auto slot = graph.edge_slot(node, heading);
    if (!slot) {
      throw Error("heading " + std::to_string(heading) + " matches no outgoing edge of node " +
                  std::to_string(node));
    }
    heading = edges[*slot].angle_deg;
  }
  s.heading = heading;
  s.prev_heading = heading;
  return s;
}

std::optional<double> heading_after(const EnvGraph& graph, const AgentState& state, Action action) {
  const auto edges = graph.out_edges(state.node);
  if (edges.empty()) return std::nullopt;
  if (action == Action::Forward || action == Action::Stop) return state.heading;
  const auto slot = graph.edge_slot(state.node, state.heading);
  if (!slot) return std::nullopt;
  const std::size_t n = edges.size();
  const std::size_t next = action == Action::Left ? (*slot + n - 1) % n : (*slot + 1) % n;
  return edges[next].angle_deg;
}

std::optional<AgentState> step(const EnvGraph& graph, const AgentState& state, Action action) {
  require_node(graph, state.node);
  if (action == Action::Stop) return std::nullopt;

  AgentState next = state;
  next.prev_heading = state.heading;
  next.step_index = state.step_index + 1;
  const auto edges = graph.out_edges(state.node);

  if (action == Action::Forward) {
    const auto slot = graph.edge_slot(state.node, state.heading);
    if (!slot) {
      throw NoForwardEdge("no outgoing edge at heading " + std::to_string(state.heading) + " from node " +
                          std::to_string(state.node));
    }
    const Edge& e = edges[*slot];
    next.node = e.to;
    next.heading = forward_heading(graph, e.to, e.angle_deg);
    next.moved = true;
    return next;
  }

  if (const auto h = heading_after(graph, state, action)) next.heading = *h;
  return next;
}

std::optional<std::size_t> shortest_path_hops(const EnvGraph& graph, NodeId u, NodeId v) {
  require_node(graph, u);
  require_node(graph, v);
  if (u == v) return 0;
  std::vector<std::size_t> dist(graph.node_count(), SIZE_MAX);
  std::deque<NodeId> queue{u};
  dist[static_cast<std::size_t>(u)] = 0;
  while (!queue.empty()) {
    const NodeId cur = queue.front();
    queue.pop_front();
    const std::size_t d = dist[static_cast<std::size_t>(cur)];
    for (const Edge& e : graph.out_edges(cur)) {
      auto& de = dist[static_cast<std::size_t>(e.to)];
      if (de != SIZE_MAX) continue;
      de = d + 1;
      if (e.to == v) return de;
      queue.push_back(e.to);
    }
  }
  return std::nullopt;
}

std::size_t junction_count(const EnvGraph& graph, NodeId node) {
  return graph.out_edges(node).size();
}

} // namespace blocknav
