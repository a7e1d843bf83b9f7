#pragma once

#include "blocknav/agent/model.hpp"
#include "blocknav/instruction.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blocknav::agent {

EpisodeLabels labels_of(const InstructionRecord& record);

struct TeacherForced {
  LossTerms loss;
  std::vector<StepOutput> steps;
};

/// Gold actions drive the environment while every step is scored.
TeacherForced teacher_forced(const Model& model, nc::Graph& g, const EnvGraph& world,
                             const InstructionRecord& record);

struct TraceStep {
  std::size_t t = 0;
  NodeId node = 0;
  double heading = 0.0;
  Action action = Action::Stop;
  std::array<double, kActionCount> scores{};
  double e_p = 0.0;
  /// Block progress of the visited state.
  double e_p_label = 0.0;
  double g_c = 0.0;
  double g_l = 0.0;
  std::vector<double> relevance; // empty when sentence attention is off
};

struct EpisodeTrace {
  std::string episode_id;
  std::vector<TraceStep> steps;
  std::vector<NodeId> path;
  /// The step budget ran out before STOP.
  bool forced_stop = false;

  NodeId stop_node() const { return path.back(); }
};

/// Returns an action to take instead of the model's choice, or nullopt.
using ActionOverride = std::function<std::optional<Action>(std::size_t t, const AgentState& state)>;

/// Greedy decoding from the gold start state until STOP or max_T steps.
EpisodeTrace rollout(const Model& model, const EnvGraph& world, const InstructionRecord& record,
                     const ActionOverride& override_action = {});

} // namespace blocknav::agent
