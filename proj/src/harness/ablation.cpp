#include "blocknav/harness/ablation.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/harness/evaluate.hpp"

#include <charconv>
#include <cmath>

namespace blocknav::harness {

using agent::AgentConfig;

Grid overall_grid(const AgentConfig& base) {
  Grid g{"overall", "Ablation of the overall design", "Model", {}, {}};
  AgentConfig baseline = base;
  baseline.baseline_mode = true;
  AgentConfig with_bal = base;
  with_bal.use_sap_module = false;
  AgentConfig with_sap = base;
  with_sap.use_bal_module = false;
  g.variants = {{"Baseline", baseline, {}, false},
                {"With BAL", with_bal, {}, false},
                {"With SAP", with_sap, {}, false},
                {"Full model", base, {}, true}};
  return g;
}

Grid bal_grid(const AgentConfig& base) {
  Grid g{"bal", "Block-aware locating components", "", {"g_l", "g_c", "L_BAL", "L_GAL"}, {}};
  AgentConfig no_long = base;
  no_long.use_long_term_angle = false;
  AgentConfig no_current = base;
  no_current.use_current_angle = false;
  AgentConfig no_loss = base;
  no_loss.use_bal_loss = false;
  AgentConfig global = base;
  global.use_bal_loss = false;
  global.global_locating_variant = true;
  g.variants = {{"", no_long, {false, true, true, false}, false},
                {"", no_current, {true, false, true, false}, false},
                {"", no_loss, {true, true, false, false}, false},
                {"", global, {true, true, false, true}, false},
                {"", base, {true, true, true, false}, true}};
  return g;
}

Grid k_grid(const AgentConfig& base, const std::vector<std::size_t>& ks) {
  Grid g{"k", "Perception length of the long-term turning angle", "Value of K", {}, {}};
  for (std::size_t k : ks) {
    AgentConfig c = base;
    c.K = k;
    g.variants.push_back({std::to_string(k), c, {}, k == base.K});
  }
  return g;
}

Grid spatial_grid(const AgentConfig& base) {
  Grid g{"spatial", "Spatial information in action planning", "Model", {}, {}};
  AgentConfig plain = base;
  plain.use_spatial_in_sap = false;
  g.variants = {{"W/o spatial info", plain, {}, false}, {"Full model", base, {}, true}};
  return g;
}

Grid hsa_grid(const AgentConfig& base) {
  Grid g{"hsa", "Semantic association submodules", "", {"Token", "Sentence", "L_HSA"}, {}};
  AgentConfig token = base;
  token.use_sentence_attn = false;
  token.use_hsa_loss = false;
  AgentConfig sentence = base;
  sentence.use_token_attn = false;
  AgentConfig both = base;
  both.use_hsa_loss = false;
  g.variants = {{"", token, {true, false, false}, false},
                {"", sentence, {false, true, true}, false},
                {"", both, {true, true, false}, false},
                {"", base, {true, true, true}, true}};
  return g;
}

std::vector<std::string> grid_names() { return {"overall", "bal", "k", "spatial", "hsa"}; }

std::optional<Grid> named_grid(std::string_view name, const AgentConfig& base) {
  if (name == "overall") return overall_grid(base);
  if (name == "bal") return bal_grid(base);
  if (name == "k") return k_grid(base, {1, 2, 3, 4, 5});
  if (name == "spatial") return spatial_grid(base);
  if (name == "hsa") return hsa_grid(base);
  return std::nullopt;
}

namespace {

std::size_t parse_count(std::string_view s, std::string_view whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("invalid K list '" + std::string(whole) + "'");
  }
  return v;
}

} // namespace

std::vector<std::size_t> parse_k_list(std::string_view text) {
  std::vector<std::size_t> out;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const std::size_t lo = parse_count(text.substr(0, dots), text);
    const std::size_t hi = parse_count(text.substr(dots + 2), text);
    if (lo > hi) throw Error("invalid K list '" + std::string(text) + "': empty range");
    for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(parse_count(text.substr(start, comma - start), text));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

Stat mean_std(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

std::vector<VariantSummary> summarize(const Grid& grid, const std::vector<RunOutcome>& runs) {
  std::vector<VariantSummary> out(grid.variants.size());
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    std::vector<double> tc, spd, sed;
    for (const RunOutcome& r : runs) {
      if (r.variant != v) continue;
      if (!r.result) {
        ++out[v].failed;
        continue;
      }
      ++out[v].completed;
      tc.push_back(r.result->tc);
      spd.push_back(r.result->spd);
      sed.push_back(r.result->sed);
    }
    out[v].tc = mean_std(tc);
    out[v].spd = mean_std(spd);
    out[v].sed = mean_std(sed);
  }
  return out;
}

SuiteResult run_ablation_suite(const Grid& grid, const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                               const EnvGraph& world, const std::vector<const InstructionRecord*>& train_episodes,
                               const std::vector<const InstructionRecord*>& eval_episodes, std::string split,
                               const std::function<void(const RunArtifacts&)>& on_run) {
  SuiteResult suite{grid, std::move(split), {}, {}};
  for (std::size_t v = 0; v < grid.variants.size(); ++v) {
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base;
      config.agent = grid.variants[v].agent;
      config.seed = seed;
      RunOutcome outcome;
      outcome.run_id = grid.name + "-" + std::to_string(v + 1) + "-s" + std::to_string(seed);
      outcome.variant = v;
      outcome.seed = seed;
      outcome.config_hash = config_hash(config);
      try {
        config.agent.validate();
        const TrainResult trained = train(config, world, train_episodes);
        const EvalResult eval = evaluate(trained.model, world, eval_episodes, config.tc_rule);
        outcome.result = eval;
        if (on_run) on_run(RunArtifacts{config, trained, eval, outcome});
      } catch (const std::exception& e) {
        outcome.result.reset();
        outcome.error = e.what();
      }
      suite.runs.push_back(std::move(outcome));
    }
  }
  suite.summary = summarize(suite.grid, suite.runs);
  return suite;
}

} // namespace blocknav::harness
