#include "blocknav/agent/model.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/numcore/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace blocknav::agent {

using nc::Tensor;
using nc::Var;

nc::ParamStore make_param_layout(const AgentConfig& c) {
  c.validate();
  nc::ParamStore ps;
  const std::size_t d = c.d;
  ps.add("embed.token", {c.vocab_size, c.word_dim()}, 1);
  nc::add_lstm_params(ps, "text.fwd", c.word_dim(), c.d_t / 2);
  nc::add_lstm_params(ps, "text.bwd", c.word_dim(), c.d_t / 2);
  ps.add("embed.action", {kStartAction + 1, c.dim_action}, 1);
  ps.add("embed.junction", {c.max_junction + 1, c.dim_junction}, 1);
  ps.add("embed.timestep", {c.max_T, c.dim_timestep}, 1);
  nc::add_lstm_params(ps, "phi1", c.d_v + 2 + c.dim_junction + c.dim_action, d);
  ps.add("bal.W_b", {d, d});
  ps.add("bal.W_p", {d, 1});
  nc::add_attention_params(ps, "hsa.sent", d, c.d_t, d);
  ps.add("hsa.W_shat", {d, d});
  ps.add("hsa.W_s", {c.d_t, d});
  ps.add("hsa.W", {d, 1});
  nc::add_attention_params(ps, "hsa.tok", d, c.d_t, d);
  nc::add_attention_params(ps, "vis", d, c.d_v, d);
  ps.add("base.W_pool", {c.d_t, d});
  nc::add_lstm_params(ps, "phi2", 4 * d + c.dim_timestep, d);
  ps.add("plan.W_a", {d + 1, kActionCount});
  ps.add("plan.b_a", {kActionCount}, d + 1);
  return ps;
}

Model::Model(AgentConfig config, std::uint64_t seed) : config_(config), params_(make_param_layout(config)) {
  params_.init_uniform(seed);
}

Model::Model(AgentConfig config, nc::ParamStore params) : config_(config), params_(std::move(params)) {
  const nc::ParamStore layout = make_param_layout(config_);
  if (layout.size() != params_.size()) {
    throw Error("checkpoint holds " + std::to_string(params_.size()) + " parameters, config expects " +
                std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout.name(i) != params_.name(i) || layout.value(i).shape() != params_.value(i).shape()) {
      throw Error("checkpoint parameter " + params_.name(i) + " " + nc::shape_string(params_.value(i).shape()) +
                  " does not match expected " + layout.name(i) + " " +
                  nc::shape_string(layout.value(i).shape()));
    }
  }
}

std::vector<std::string> Model::describe() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back(params_.name(i) + " " + nc::shape_string(params_.value(i).shape()));
  }
  return out;
}

InstructionEncoding encode_instruction(nc::Graph& g, const AgentConfig& config, const std::vector<int>& tokens,
                                       const Spans& spans) {
  (void)config;
  if (spans.empty()) throw EmptySequence("instruction has no sentences");
  for (const auto& [b, e] : spans) {
    if (e <= b) throw EmptySequence("empty sentence span [" + std::to_string(b) + ", " + std::to_string(e) + ")");
    if (e > tokens.size()) throw ShapeMismatch("sentence span beyond the instruction");
  }
  InstructionEncoding enc;
  enc.spans = spans;
  enc.I = nc::bidirectional_encode(g.param("embed.token"), nc::lstm_weights(g, "text.fwd"),
                                   nc::lstm_weights(g, "text.bwd"), tokens);
  std::vector<Var> rows;
  rows.reserve(spans.size());
  for (const auto& [b, e] : spans) rows.push_back(nc::mean_rows(enc.I, b, e));
  enc.I_s = nc::stack_rows(rows);
  return enc;
}

std::array<double, kActionCount> StepOutput::score_values() const {
  std::array<double, kActionCount> out{};
  const Tensor& s = scores.value();
  for (std::size_t i = 0; i < kActionCount; ++i) out[i] = s[i];
  return out;
}

void candidate_angles(const EnvGraph& world, const AgentState& state, std::array<double, kActionCount>& g_action,
                      std::array<bool, kActionCount>& legal) {
  const bool has_edges = !world.out_edges(state.node).empty();
  for (Action a : kAllActions) {
    const auto i = static_cast<std::size_t>(a);
    g_action[i] = 0.0;
    legal[i] = a == Action::Stop || has_edges;
    if (has_edges && (a == Action::Left || a == Action::Right)) {
      const auto h = heading_after(world, state, a);
      if (h) {
        g_action[i] = normalize_heading_delta(state.heading, *h);
      } else {
        legal[i] = false;
      }
    }
  }
}

Episode::Episode(const Model& model, nc::Graph& g, const EnvGraph& world, const std::vector<int>& tokens,
                 const Spans& spans)
    : model_(model), cfg_(model.config()), g_(g), world_(world) {
  if (world.bins() != cfg_.bins || world.feature_dim() != cfg_.d_v) {
    throw ShapeMismatch("world observations are " + std::to_string(world.bins()) + "x" +
                        std::to_string(world.feature_dim()) + ", model expects " + std::to_string(cfg_.bins) + "x" +
                        std::to_string(cfg_.d_v));
  }
  enc_ = encode_instruction(g, cfg_, tokens, spans);
  if (cfg_.sentence_attn_active()) {
    sent_att_ = nc::attention_weights(g, "hsa.sent", cfg_.heads);
    sent_mem_ = nc::project_memory(sent_att_, enc_.I_s);
    s_proj_ = nc::relu(nc::matmul(enc_.I_s, g.param("hsa.W_s")));
  }
  if (cfg_.token_attn_active()) {
    tok_att_ = nc::attention_weights(g, "hsa.tok", cfg_.heads);
    tok_mem_ = nc::project_memory(tok_att_, enc_.I);
  }
  if (!cfg_.sap_active() || (!cfg_.use_sentence_attn && !cfg_.use_token_attn)) {
    pooled_ = nc::matvec(g.param("base.W_pool"), nc::mean_rows(enc_.I, 0, tokens.size()));
  }
  ctx_.phi1 = nc::lstm_zero_state(g, cfg_.d);
  ctx_.phi2 = nc::lstm_zero_state(g, cfg_.d);
}

StepOutput Episode::step(const AgentState& state) {
  StepOutput out;
  const std::size_t B = cfg_.bins;
  const std::size_t dv = cfg_.d_v;

  Tensor obs({B, dv}, world_.observation(state.node, state.heading));
  Tensor pooled({dv});
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < dv; ++i) pooled[i] += obs.at(b, i) / static_cast<double>(B);
  }
  const Var X = g_.constant(std::move(obs));

  const double g_c = normalize_heading_delta(state.prev_heading, state.heading);
  ctx_.g_history.push_back(g_c);
  out.g_c = cfg_.use_current_angle ? g_c : 0.0;
  out.g_l = cfg_.long_term_angle_active() ? long_term_angle(ctx_.g_history, ctx_.t, cfg_.K) : 0.0;
  const std::size_t junction = std::min(junction_count(world_, state.node), cfg_.max_junction);

  const Var input = nc::concat({g_.constant(std::move(pooled)), g_.constant(Tensor::vector({out.g_c, out.g_l})),
                                nc::row(g_.param("embed.junction"), junction),
                                nc::row(g_.param("embed.action"), ctx_.a_prev)});
  ctx_.phi1 = nc::lstm_cell(nc::lstm_weights(g_, "phi1"), input, ctx_.phi1);
  out.o_t = ctx_.phi1.h;

  if (cfg_.bal_active()) {
    const Located loc = locate(g_, out.o_t);
    out.o_p = loc.o_p;
    out.e_p = loc.e_p;
  } else {
    out.o_p = out.o_t;
    out.e_p = g_.constant(Tensor::vector({0.5}));
  }
  const Var spatial = cfg_.use_spatial_in_sap ? out.o_p : out.o_t;

  const std::size_t L = enc_.I.value().rows();
  out.mask.assign(L, 1.0);
  if (cfg_.sap_active() && (cfg_.use_sentence_attn || cfg_.use_token_attn)) {
    if (cfg_.use_sentence_attn) {
      out.I_s_hat = nc::multi_head_attention(sent_att_, spatial, sent_mem_, &out.sentence_weights);
      const Var r_hat = nc::relu(nc::matvec(g_.param("hsa.W_shat"), out.I_s_hat));
      const Var joint = nc::mul_rows(s_proj_, r_hat);
      out.r = nc::sigmoid(nc::reshape(nc::matmul(joint, g_.param("hsa.W")), {enc_.spans.size()}));
      out.has_relevance = true;
    }
    if (cfg_.use_token_attn) {
      nc::ProjectedMemory mem = tok_mem_;
      if (out.has_relevance) {
        const Var M = nc::expand_spans(out.r, enc_.spans);
        out.mask = M.value().data();
        mem.K = nc::scale_rows(mem.K, M);
        mem.V = nc::scale_rows(mem.V, M);
      }
      out.I_attn = nc::multi_head_attention(tok_att_, spatial, mem, &out.token_weights);
    } else {
      out.I_attn = out.I_s_hat;
    }
  } else {
    out.I_attn = pooled_;
  }

  out.x_attn = attend_visual(g_, cfg_, out.I_attn, X, &out.visual_weights);
  const std::size_t t_row = std::min(ctx_.t, cfg_.max_T - 1);
  const Var planning_in = nc::concat(
      {out.x_attn, out.I_attn, out.o_t, spatial, nc::row(g_.param("embed.timestep"), t_row)});
  ctx_.phi2 = nc::lstm_cell(nc::lstm_weights(g_, "phi2"), planning_in, ctx_.phi2);
  out.z = ctx_.phi2.h;

  candidate_angles(world_, state, out.g_action, out.legal);
  out.scores = action_scores(g_, out.z, out.g_action, out.legal);
  ++ctx_.t;
  return out;
}

Located locate(nc::Graph& g, Var o_t) {
  Located loc;
  loc.o_p = nc::relu(nc::matvec(g.param("bal.W_b"), o_t));
  loc.e_p = nc::sigmoid(nc::matvec(g.param("bal.W_p"), loc.o_p));
  return loc;
}

Var apply_token_mask(Var I, Var r, const Spans& spans) {
  return nc::scale_rows(I, nc::expand_spans(r, spans));
}

Association associate(nc::Graph& g, const AgentConfig& config, Var query, const InstructionEncoding& enc) {
  Association a;
  const auto sent = nc::attention_weights(g, "hsa.sent", config.heads);
  a.I_s_hat = nc::multi_head_attention(sent, query, enc.I_s);
  const Var r_hat = nc::relu(nc::matvec(g.param("hsa.W_shat"), a.I_s_hat));
  const Var r_s = nc::relu(nc::matmul(enc.I_s, g.param("hsa.W_s")));
  a.r = nc::sigmoid(nc::reshape(nc::matmul(nc::mul_rows(r_s, r_hat), g.param("hsa.W")), {enc.spans.size()}));
  a.M = nc::expand_spans(a.r, enc.spans);
  a.I_m = nc::scale_rows(enc.I, a.M);
  a.I_attn = nc::multi_head_attention(nc::attention_weights(g, "hsa.tok", config.heads), query, a.I_m);
  return a;
}

Var attend_visual(nc::Graph& g, const AgentConfig& config, Var I_attn, Var observation, Tensor* weights) {
  return nc::multi_head_attention(nc::attention_weights(g, "vis", config.heads), I_attn, observation, weights);
}

Var action_scores(nc::Graph& g, Var z, const std::array<double, kActionCount>& g_action,
                  const std::array<bool, kActionCount>& legal) {
  const Var W_a = g.param("plan.W_a");
  const Var b_a = g.param("plan.b_a");
  std::vector<Var> parts;
  for (std::size_t a = 0; a < kActionCount; ++a) {
    if (!legal[a]) {
      parts.push_back(g.constant(Tensor::vector({-std::numeric_limits<double>::infinity()})));
      continue;
    }
    const Var feat = nc::concat({z, g.constant(Tensor::vector({g_action[a]}))});
    parts.push_back(nc::element(nc::linear(W_a, feat, b_a), a));
  }
  return nc::concat(parts);
}

std::vector<double> progress_targets(const AgentConfig& config, const std::vector<double>& block_progress) {
  if (!config.global_locating_variant) return block_progress;
  std::vector<double> out(block_progress.size());
  const double T = static_cast<double>(block_progress.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = static_cast<double>(t) / T;
  return out;
}

LossTerms compute_losses(nc::Graph& g, const AgentConfig& config, const std::vector<StepOutput>& steps,
                         const EpisodeLabels& labels) {
  const std::size_t T = steps.size();
  auto mismatch = [&](const char* what, std::size_t n) {
    throw LabelLengthMismatch(std::string(what) + " has " + std::to_string(n) + " entries for " +
                              std::to_string(T) + " steps");
  };
  if (labels.actions.size() != T) mismatch("action labels", labels.actions.size());

  LossTerms terms;
  std::vector<Var> parts;
  for (std::size_t t = 0; t < T; ++t) {
    const Var ce = nc::ce_from_scores(steps[t].scores, static_cast<std::size_t>(labels.actions[t]));
    terms.ap += ce.value()[0];
    parts.push_back(ce);
  }
  if (config.bal_loss_active()) {
    if (labels.progress.size() != T) mismatch("progress labels", labels.progress.size());
    const auto targets = progress_targets(config, labels.progress);
    for (std::size_t t = 0; t < T; ++t) {
      const Var l = nc::mse(steps[t].e_p, Tensor::vector({targets[t]}), nc::Reduction::Sum);
      terms.bal += l.value()[0];
      parts.push_back(l);
    }
  }
  if (config.hsa_loss_active()) {
    if (labels.relevance.size() != T) mismatch("relevance labels", labels.relevance.size());
    for (std::size_t t = 0; t < T; ++t) {
      const auto& row = labels.relevance[t];
      const std::size_t ns = steps[t].r.value().size();
      if (row.size() != ns) {
        throw LabelLengthMismatch("relevance row " + std::to_string(t) + " has " + std::to_string(row.size()) +
                                  " entries for " + std::to_string(ns) + " sentences");
      }
      Tensor target({ns});
      for (std::size_t i = 0; i < ns; ++i) target[i] = row[i];
      const Var l = nc::scale(nc::bce(steps[t].r, target, nc::Reduction::Sum), config.gamma_b);
      terms.hsa += l.value()[0];
      parts.push_back(l);
    }
  }
  if (parts.empty()) {
    terms.total = g.constant(Tensor::scalar(0.0));
    return terms;
  }
  terms.total = nc::sum(nc::concat(parts));
  return terms;
}

Action act_greedy(const std::array<double, kActionCount>& scores) {
  std::size_t best = kActionCount;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    if (!std::isfinite(scores[i])) continue;
    if (best == kActionCount || scores[i] > scores[best]) best = i;
  }
  if (best == kActionCount) throw AllMasked("every action score is masked");
  return static_cast<Action>(best);
}

} // namespace blocknav::agent
