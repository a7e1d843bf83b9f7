#include "blocknav/harness/metrics.hpp"

#include "blocknav/errors.hpp"

#include <algorithm>

namespace blocknav::harness {

std::string_view to_string(TcRule rule) {
  return rule == TcRule::Exact ? "exact" : "adjacent";
}

std::optional<TcRule> parse_tc_rule(std::string_view s) {
  if (s == "exact") return TcRule::Exact;
  if (s == "adjacent") return TcRule::Adjacent;
  return std::nullopt;
}

bool metric_tc(const EnvGraph& graph, NodeId stop, NodeId goal, TcRule rule) {
  if (!graph.contains(stop) || !graph.contains(goal)) throw UnknownNode("unknown node in metric_tc");
  if (stop == goal) return true;
  return rule == TcRule::Adjacent && (graph.has_edge(stop, goal) || graph.has_edge(goal, stop));
}

std::optional<std::size_t> metric_spd(const EnvGraph& graph, NodeId stop, NodeId goal) {
  return shortest_path_hops(graph, stop, goal);
}

std::size_t edit_distance(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double metric_sed(const std::vector<NodeId>& pred, const std::vector<NodeId>& gold, bool success) {
  if (!success) return 0.0;
  const std::size_t n = std::max(pred.size(), gold.size());
  if (n == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(pred, gold)) / static_cast<double>(n);
}

EvalResult aggregate(std::vector<EpisodeRow> rows) {
  EvalResult r;
  r.rows = std::move(rows);
  if (r.rows.empty()) return r;
  double tc = 0.0;
  double spd = 0.0;
  double sed = 0.0;
  for (const auto& row : r.rows) {
    tc += row.success ? 1.0 : 0.0;
    spd += row.spd;
    sed += row.sed;
  }
  const double n = static_cast<double>(r.rows.size());
  r.tc = 100.0 * tc / n;
  r.spd = spd / n;
  r.sed = sed / n;
  return r;
}

} // namespace blocknav::harness
