#pragma once

#include <json.hpp>

#include <cstddef>
#include <string>

namespace blocknav::agent {

struct AgentConfig {
  std::size_t d = 64;
  std::size_t d_t = 128;
  /// Token embedding width fed to the text encoder; 0 selects d_t / 2.
  std::size_t d_word = 0;
  std::size_t dim_timestep = 32;
  std::size_t dim_action = 16;
  std::size_t dim_junction = 16;
  std::size_t max_junction = 8;
  std::size_t K = 3;
  std::size_t heads = 4;
  std::size_t bins = 8;
  std::size_t d_v = 17;
  std::size_t vocab_size = 25;
  std::size_t max_T = 48;
  double gamma_b = 1.0;

  /// Plain state encoder, mean-pooled instruction, no auxiliary losses.
  bool baseline_mode = false;
  bool use_bal_module = true;
  bool use_bal_loss = true;
  bool use_sap_module = true;
  bool use_hsa_loss = true;
  bool use_sentence_attn = true;
  bool use_token_attn = true;
  /// Feed the spatial-aware state (rather than the plain state) to planning.
  bool use_spatial_in_sap = true;
  /// Supervise the progress score with t / T instead of block progress.
  bool global_locating_variant = false;
  bool use_current_angle = true;
  bool use_long_term_angle = true;

  std::size_t word_dim() const { return d_word ? d_word : d_t / 2; }
  bool bal_active() const { return !baseline_mode && use_bal_module; }
  bool sap_active() const { return !baseline_mode && use_sap_module; }
  bool sentence_attn_active() const { return sap_active() && use_sentence_attn; }
  bool token_attn_active() const { return sap_active() && use_token_attn; }
  bool bal_loss_active() const { return bal_active() && (use_bal_loss || global_locating_variant); }
  bool hsa_loss_active() const { return sentence_attn_active() && use_hsa_loss; }
  bool long_term_angle_active() const { return bal_active() && use_long_term_angle; }

  /// Throws Error naming the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const AgentConfig& c);
/// Starts from `base` and overrides the keys present; unknown keys throw.
AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig base = {});

} // namespace blocknav::agent
