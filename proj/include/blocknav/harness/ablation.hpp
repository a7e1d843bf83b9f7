#pragma once

#include "blocknav/harness/train.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blocknav::harness {

struct Variant {
  std::string label;
  agent::AgentConfig agent;
  /// One flag per Grid::mark_columns entry.
  std::vector<bool> marks;
  bool is_default = false;
};

struct Grid {
  std::string name;
  std::string title;
  /// Heading of the label column; empty hides the column.
  std::string label_column;
  std::vector<std::string> mark_columns;
  std::vector<Variant> variants;
};

/// Baseline, with BAL, with SAP, full model.
Grid overall_grid(const agent::AgentConfig& base);
/// Without long-term angle, without current angle, without locating loss,
/// global locating loss, full model.
Grid bal_grid(const agent::AgentConfig& base);
/// One row per K; the base K is marked as the default.
Grid k_grid(const agent::AgentConfig& base, const std::vector<std::size_t>& ks);
/// Planning on the plain state vs. the spatial-aware state.
Grid spatial_grid(const agent::AgentConfig& base);
/// Token only, sentence with relevance loss, both without it, full model.
Grid hsa_grid(const agent::AgentConfig& base);

/// Names accepted by named_grid: overall, bal, k, spatial, hsa.
std::vector<std::string> grid_names();
/// The k grid uses K = 1..5.
std::optional<Grid> named_grid(std::string_view name, const agent::AgentConfig& base);

/// "1..5", "3", or "1,2,4". Throws Error on anything else.
std::vector<std::size_t> parse_k_list(std::string_view text);

struct RunOutcome {
  std::string run_id;
  std::size_t variant = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::optional<EvalResult> result;
  std::string error; // set when the run failed
};

struct Stat {
  double mean = 0.0;
  double std = 0.0; // sample standard deviation, 0 for fewer than 2 runs
};

struct VariantSummary {
  std::size_t completed = 0;
  std::size_t failed = 0;
  Stat tc;
  Stat spd;
  Stat sed;
};

struct SuiteResult {
  Grid grid;
  std::string split;
  std::vector<RunOutcome> runs;
  std::vector<VariantSummary> summary; // parallel to grid.variants
};

Stat mean_std(const std::vector<double>& values);
std::vector<VariantSummary> summarize(const Grid& grid, const std::vector<RunOutcome>& runs);

struct RunArtifacts {
  const TrainConfig& config;
  const TrainResult& trained;
  const EvalResult& eval;
  const RunOutcome& outcome;
};

/// Trains every variant at every seed and evaluates on `eval_episodes`.
/// A failing run is recorded in its outcome and the grid carries on.
SuiteResult run_ablation_suite(const Grid& grid, const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                               const EnvGraph& world, const std::vector<const InstructionRecord*>& train_episodes,
                               const std::vector<const InstructionRecord*>& eval_episodes, std::string split,
                               const std::function<void(const RunArtifacts&)>& on_run = {});

} // namespace blocknav::harness
