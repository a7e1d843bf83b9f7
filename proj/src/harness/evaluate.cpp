#include "blocknav/harness/evaluate.hpp"

namespace blocknav::harness {

std::size_t intersections_on_path(const EnvGraph& world, const std::vector<NodeId>& path) {
  std::size_t n = 0;
  for (NodeId v : path) n += junction_count(world, v) >= 3 ? 1 : 0;
  return n;
}

EpisodeRow score_episode(const EnvGraph& world, const InstructionRecord& record, const agent::EpisodeTrace& trace,
                         TcRule rule) {
  EpisodeRow row;
  row.id = record.id;
  row.stop = trace.stop_node();
  row.goal = record.gold_path.back();
  row.success = metric_tc(world, row.stop, row.goal, rule);
  const auto spd = metric_spd(world, row.stop, row.goal);
  row.spd = spd ? static_cast<double>(*spd) : static_cast<double>(world.node_count());
  row.sed = metric_sed(trace.path, record.gold_path, row.success);
  row.forced_stop = trace.forced_stop;
  row.instruction_length = record.tokens.size();
  row.intersections = intersections_on_path(world, record.gold_path);
  return row;
}

EvalResult evaluate(const agent::Model& model, const EnvGraph& world,
                    const std::vector<const InstructionRecord*>& episodes, TcRule rule,
                    std::vector<agent::EpisodeTrace>* traces) {
  std::vector<EpisodeRow> rows;
  rows.reserve(episodes.size());
  for (const InstructionRecord* rec : episodes) {
    agent::EpisodeTrace trace = agent::rollout(model, world, *rec);
    rows.push_back(score_episode(world, *rec, trace, rule));
    if (traces) traces->push_back(std::move(trace));
  }
  return aggregate(std::move(rows));
}

} // namespace blocknav::harness
