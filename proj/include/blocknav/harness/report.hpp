#pragma once

#include "blocknav/agent/episode.hpp"
#include "blocknav/harness/ablation.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blocknav::harness {

struct MetricsRow {
  std::string run_id;
  std::string split;
  double tc = 0.0;
  double spd = 0.0;
  double sed = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr std::string_view kMetricsHeader = "run_id,split,tc,spd,sed,seed,config_hash";

/// Numbers are written with 17 significant digits so parsing restores them.
std::string metrics_csv(const std::vector<MetricsRow>& rows);
/// Throws SchemaViolation("<source>:<line>: <reason>").
std::vector<MetricsRow> parse_metrics_csv(std::string_view text, std::string_view source = "<metrics>");
/// Completed runs only, in run order.
std::vector<MetricsRow> metrics_rows(const SuiteResult& suite);

/// Per-episode rows of an evaluation.
std::string episodes_csv(const EvalResult& result);

/// Grid rendered as a markdown table, metrics as "mean ± std" over seeds;
/// failed runs are listed below the table.
std::string markdown_table(const SuiteResult& suite);

enum class Complexity { InstructionLength, Intersections };

struct Bucket {
  double lo = 0.0; // exclusive, except for the first bucket
  double hi = 0.0; // inclusive
  std::size_t count = 0;
  double mean_sed = 0.0;
};

/// Episodes split at the quartiles of the complexity measure; empty buckets
/// (repeated quartiles) are dropped.
std::vector<Bucket> quartile_buckets(const std::vector<EpisodeRow>& rows, Complexity measure);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// One <circle class="point"> per data point.
std::string svg_line_plot(const LinePlot& plot);

/// SED over quartile buckets of instruction length and of intersection count,
/// keyed by file name.
std::vector<std::pair<std::string, std::string>> complexity_plots(const EvalResult& result);

/// Per-step record, progress polyline (prediction and label), and the
/// steps x sentences relevance heatmap (null when sentence attention is off).
nlohmann::json trace_json(const agent::EpisodeTrace& trace, const InstructionRecord& record);
std::string trace_svg(const agent::EpisodeTrace& trace, const InstructionRecord& record);

/// Writes config.json, log.jsonl, checkpoint.bin, metrics.csv (one row),
/// episodes.csv and plots/*.svg under `dir`.
void write_run(const std::filesystem::path& dir, const TrainConfig& config, const TrainResult& trained,
               const EvalResult& eval, const MetricsRow& row);

} // namespace blocknav::harness
