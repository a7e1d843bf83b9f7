#pragma once

#include "blocknav/envgraph.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blocknav::harness {

/// Exact: stop on the goal. Adjacent: the goal or a node joined to it by an
/// edge in either direction.
enum class TcRule { Exact, Adjacent };

std::string_view to_string(TcRule rule);
std::optional<TcRule> parse_tc_rule(std::string_view s);

bool metric_tc(const EnvGraph& graph, NodeId stop, NodeId goal, TcRule rule = TcRule::Adjacent);
/// Directed hops from stop to goal; nullopt when unreachable.
std::optional<std::size_t> metric_spd(const EnvGraph& graph, NodeId stop, NodeId goal);
std::size_t edit_distance(const std::vector<NodeId>& a, const std::vector<NodeId>& b);
/// success * (1 - ED / max(len)).
double metric_sed(const std::vector<NodeId>& pred, const std::vector<NodeId>& gold, bool success);

struct EpisodeRow {
  std::string id;
  NodeId stop = 0;
  NodeId goal = 0;
  double spd = 0.0;
  double sed = 0.0;
  bool success = false;
  bool forced_stop = false;
  std::size_t instruction_length = 0;
  std::size_t intersections = 0;
};

struct EvalResult {
  double tc = 0.0;  // percent
  double spd = 0.0; // mean hops
  double sed = 0.0; // mean in [0, 1]
  std::vector<EpisodeRow> rows;
};

/// Aggregates in row order.
EvalResult aggregate(std::vector<EpisodeRow> rows);

} // namespace blocknav::harness
