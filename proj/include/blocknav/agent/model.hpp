#pragma once

#include "blocknav/agent/config.hpp"
#include "blocknav/envgraph.hpp"
#include "blocknav/numcore/graph.hpp"
#include "blocknav/numcore/layers.hpp"
#include "blocknav/numcore/params.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace blocknav::agent {

using Spans = std::vector<std::pair<std::size_t, std::size_t>>;

/// Index of the "no previous action" row of the action embedding table.
inline constexpr std::size_t kStartAction = kActionCount;

class Model {
public:
  /// Fresh parameters, uniform fan-in initialisation from `seed`.
  Model(AgentConfig config, std::uint64_t seed);
  /// Adopts existing parameters; throws Error when names or shapes differ
  /// from what the config requires.
  Model(AgentConfig config, nc::ParamStore params);

  const AgentConfig& config() const { return config_; }
  const nc::ParamStore& params() const { return params_; }
  nc::ParamStore& params() { return params_; }

  /// "name [shape]" per parameter, in checkpoint order.
  std::vector<std::string> describe() const;

private:
  AgentConfig config_;
  nc::ParamStore params_;
};

/// Parameter layout implied by a config, with zero values.
nc::ParamStore make_param_layout(const AgentConfig& config);

struct InstructionEncoding {
  nc::Var I;   // [L x d_t]
  nc::Var I_s; // [N_s x d_t]
  Spans spans;
};

/// Throws EmptySequence for an empty instruction or an empty sentence.
InstructionEncoding encode_instruction(nc::Graph& g, const AgentConfig& config, const std::vector<int>& tokens,
                                       const Spans& spans);

struct StepContext {
  nc::LstmState phi1;
  nc::LstmState phi2;
  std::size_t a_prev = kStartAction;
  std::vector<double> g_history;
  std::size_t t = 0;
};

struct StepOutput {
  nc::Var o_t;
  nc::Var o_p;
  nc::Var e_p;     // [1]
  nc::Var I_s_hat; // sentence-level context, when sentence attention is on
  nc::Var r;       // [N_s], when sentence attention is on
  nc::Var I_attn;
  nc::Var x_attn;
  nc::Var z;
  nc::Var scores; // [4], masked entries are -inf
  bool has_relevance = false;
  std::vector<double> mask; // token mask M, length L
  std::array<bool, kActionCount> legal{};
  std::array<double, kActionCount> g_action{};
  double g_c = 0.0;
  double g_l = 0.0;
  /// Attention distributions [heads x N] of this step.
  nc::Tensor sentence_weights;
  nc::Tensor token_weights;
  nc::Tensor visual_weights;

  double progress() const { return e_p.value()[0]; }
  std::array<double, kActionCount> score_values() const;
};

/// g^a for every action: normalised turning angle the action would produce
/// (FORWARD and STOP give 0); `legal` is false where the action has no edge
/// to act on.
void candidate_angles(const EnvGraph& world, const AgentState& state, std::array<double, kActionCount>& g_action,
                      std::array<bool, kActionCount>& legal);

struct Located {
  nc::Var o_p; // ReLU(W_b^T o_t)
  nc::Var e_p; // sigmoid(W_p^T o_p), [1]
};
Located locate(nc::Graph& g, nc::Var o_t);

struct Association {
  nc::Var I_s_hat;
  nc::Var r;
  nc::Var M;
  nc::Var I_m;
  nc::Var I_attn;
};

/// Sentence attention, relevance scores, token mask and masked token
/// attention for one query, computed directly on the instruction rows.
/// Episode::step computes the same quantities with the key/value
/// projections hoisted out of the step loop.
Association associate(nc::Graph& g, const AgentConfig& config, nc::Var query, const InstructionEncoding& enc);

/// I with every row of sentence i scaled by r_i.
nc::Var apply_token_mask(nc::Var I, nc::Var r, const Spans& spans);

nc::Var attend_visual(nc::Graph& g, const AgentConfig& config, nc::Var I_attn, nc::Var observation,
                      nc::Tensor* weights = nullptr);

/// Score of action a is W_a[:, a]^T [z, g^a] + b_a[a]; illegal actions get -inf.
nc::Var action_scores(nc::Graph& g, nc::Var z, const std::array<double, kActionCount>& g_action,
                      const std::array<bool, kActionCount>& legal);

/// Runs the model step by step over one episode on a single graph tape.
class Episode {
public:
  Episode(const Model& model, nc::Graph& g, const EnvGraph& world, const std::vector<int>& tokens,
          const Spans& spans);

  const InstructionEncoding& instruction() const { return enc_; }
  const StepContext& context() const { return ctx_; }

  /// Forward pass for the agent in `state`; advances the recurrent context.
  StepOutput step(const AgentState& state);
  /// Action taken after the last step (fed back at the next step).
  void set_previous_action(Action a) { ctx_.a_prev = static_cast<std::size_t>(a); }

private:
  const Model& model_;
  const AgentConfig& cfg_;
  nc::Graph& g_;
  const EnvGraph& world_;
  InstructionEncoding enc_;
  StepContext ctx_;
  nc::AttentionWeights sent_att_;
  nc::AttentionWeights tok_att_;
  nc::ProjectedMemory sent_mem_;
  nc::ProjectedMemory tok_mem_;
  nc::Var s_proj_;    // ReLU(I_s W_s), [N_s x d]
  nc::Var pooled_;    // W_pool^T mean(I), [d]
};

struct LossTerms {
  nc::Var total;
  double ap = 0.0;
  double bal = 0.0;
  double hsa = 0.0;
};

struct EpisodeLabels {
  std::vector<Action> actions;
  std::vector<double> progress;
  std::vector<std::vector<std::uint8_t>> relevance;
};

/// Sum over steps of cross-entropy, squared progress error, and weighted
/// relevance BCE; disabled terms are exactly 0. Throws LabelLengthMismatch.
LossTerms compute_losses(nc::Graph& g, const AgentConfig& config, const std::vector<StepOutput>& steps,
                         const EpisodeLabels& labels);

/// Progress targets actually supervised: block progress, or t / T under the
/// global-locating variant.
std::vector<double> progress_targets(const AgentConfig& config, const std::vector<double>& block_progress);

/// Highest score, ties to the lower action index. Throws AllMasked.
Action act_greedy(const std::array<double, kActionCount>& scores);

} // namespace blocknav::agent
