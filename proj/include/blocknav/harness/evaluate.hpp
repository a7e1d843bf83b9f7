#pragma once

#include "blocknav/agent/episode.hpp"
#include "blocknav/harness/metrics.hpp"

#include <vector>

namespace blocknav::harness {

/// Per-episode row for a finished rollout.
EpisodeRow score_episode(const EnvGraph& world, const InstructionRecord& record, const agent::EpisodeTrace& trace,
                         TcRule rule);

/// Greedy rollouts over the episodes, aggregated in the given order.
EvalResult evaluate(const agent::Model& model, const EnvGraph& world,
                    const std::vector<const InstructionRecord*>& episodes, TcRule rule = TcRule::Adjacent,
                    std::vector<agent::EpisodeTrace>* traces = nullptr);

/// Number of nodes with out-degree >= 3 along the gold path.
std::size_t intersections_on_path(const EnvGraph& world, const std::vector<NodeId>& path);

} // namespace blocknav::harness
