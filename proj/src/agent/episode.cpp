#include "blocknav/agent/episode.hpp"

#include "blocknav/errors.hpp"

namespace blocknav::agent {

EpisodeLabels labels_of(const InstructionRecord& record) {
  return {record.gold_actions, record.progress_labels, record.relevance_labels};
}

TeacherForced teacher_forced(const Model& model, nc::Graph& g, const EnvGraph& world,
                             const InstructionRecord& record) {
  if (record.gold_path.empty() || record.gold_actions.empty()) throw Error("record " + record.id + " is empty");
  TeacherForced out;
  Episode ep(model, g, world, record.tokens, record.sentence_spans);
  AgentState state = initial_state(world, record.gold_path.front(), record.initial_heading);
  for (std::size_t t = 0; t < record.gold_actions.size(); ++t) {
    out.steps.push_back(ep.step(state));
    const Action a = record.gold_actions[t];
    ep.set_previous_action(a);
    const auto next = step(world, state, a);
    if (!next) break;
    state = *next;
  }
  out.loss = compute_losses(g, model.config(), out.steps, labels_of(record));
  return out;
}

EpisodeTrace rollout(const Model& model, const EnvGraph& world, const InstructionRecord& record,
                     const ActionOverride& override_action) {
  nc::Graph g(&model.params(), false);
  Episode ep(model, g, world, record.tokens, record.sentence_spans);
  EpisodeTrace trace;
  trace.episode_id = record.id;
  AgentState state = initial_state(world, record.gold_path.front(), record.initial_heading);
  trace.path.push_back(state.node);
  const std::size_t max_T = model.config().max_T;
  for (std::size_t t = 0;; ++t) {
    if (t >= max_T) {
      trace.forced_stop = true;
      break;
    }
    const StepOutput out = ep.step(state);
    TraceStep ts;
    ts.t = t;
    ts.node = state.node;
    ts.heading = state.heading;
    ts.scores = out.score_values();
    ts.e_p = out.progress();
    ts.e_p_label = block_progress_label(world, state);
    ts.g_c = out.g_c;
    ts.g_l = out.g_l;
    if (out.has_relevance) ts.relevance = out.r.value().data();
    std::optional<Action> chosen;
    if (override_action) chosen = override_action(t, state);
    ts.action = chosen ? *chosen : act_greedy(ts.scores);
    trace.steps.push_back(ts);
    ep.set_previous_action(ts.action);
    const auto next = step(world, state, ts.action);
    if (!next) break;
    if (ts.action == Action::Forward) trace.path.push_back(next->node);
    state = *next;
  }
  return trace;
}

} // namespace blocknav::agent
