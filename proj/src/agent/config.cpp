#include "blocknav/agent/config.hpp"

#include "blocknav/errors.hpp"

namespace blocknav::agent {
namespace {

template <class F>
void each_field(AgentConfig& c, F&& f) {
  f("d", c.d);
  f("d_t", c.d_t);
  f("d_word", c.d_word);
  f("dim_timestep", c.dim_timestep);
  f("dim_action", c.dim_action);
  f("dim_junction", c.dim_junction);
  f("max_junction", c.max_junction);
  f("K", c.K);
  f("heads", c.heads);
  f("bins", c.bins);
  f("d_v", c.d_v);
  f("vocab_size", c.vocab_size);
  f("max_T", c.max_T);
  f("gamma_b", c.gamma_b);
  f("baseline_mode", c.baseline_mode);
  f("use_bal_module", c.use_bal_module);
  f("use_bal_loss", c.use_bal_loss);
  f("use_sap_module", c.use_sap_module);
  f("use_hsa_loss", c.use_hsa_loss);
  f("use_sentence_attn", c.use_sentence_attn);
  f("use_token_attn", c.use_token_attn);
  f("use_spatial_in_sap", c.use_spatial_in_sap);
  f("global_locating_variant", c.global_locating_variant);
  f("use_current_angle", c.use_current_angle);
  f("use_long_term_angle", c.use_long_term_angle);
}

} // namespace

void AgentConfig::validate() const {
  auto positive = [](const char* name, std::size_t v) {
    if (v == 0) throw Error(std::string("agent config: ") + name + " must be positive");
  };
  positive("d", d);
  positive("d_t", d_t);
  positive("dim_timestep", dim_timestep);
  positive("dim_action", dim_action);
  positive("dim_junction", dim_junction);
  positive("heads", heads);
  positive("bins", bins);
  positive("d_v", d_v);
  positive("vocab_size", vocab_size);
  positive("max_T", max_T);
  if (d_t % 2 != 0) throw Error("agent config: d_t must be even");
  if (d % heads != 0) throw Error("agent config: heads must divide d");
  if (gamma_b < 0.0) throw Error("agent config: gamma_b must be nonnegative");
}

nlohmann::json to_json(const AgentConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  AgentConfig copy = c;
  each_field(copy, [&](const char* key, auto& v) { j[key] = v; });
  return j;
}

AgentConfig agent_config_from_json(const nlohmann::json& j, AgentConfig base) {
  if (!j.is_object()) throw Error("agent config must be a JSON object");
  std::size_t known = 0;
  each_field(base, [&](const char* key, auto& v) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    ++known;
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw Error(std::string("agent config: ") + key + " must be a boolean");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw Error(std::string("agent config: ") + key + " must be a number");
    } else {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0) throw Error(std::string("agent config: ") + key + " must be a nonnegative integer");
    }
    v = it->template get<T>();
  });
  if (known != j.size()) {
    const nlohmann::json defaults = to_json(AgentConfig{});
    for (const auto& [key, _] : j.items()) {
      if (!defaults.contains(key)) throw Error("agent config: unknown key '" + key + "'");
    }
  }
  base.validate();
  return base;
}

} // namespace blocknav::agent
