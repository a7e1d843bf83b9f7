#pragma once

#include "blocknav/envgraph.hpp"
#include "blocknav/instruction.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace blocknav {

struct DatasetParams {
  std::uint64_t seed = 0;
  std::size_t n_train = 200;
  std::size_t n_dev = 0;
  std::size_t n_test = 50;
  std::size_t min_blocks = 1;
  std::size_t max_blocks = 3;
  double filler_prob = 0.3;
  std::size_t max_actions = 40;

  friend bool operator==(const DatasetParams&, const DatasetParams&) = default;
};

struct Dataset {
  std::string world_file;
  std::string world_hash;
  std::vector<std::string> vocab;
  DatasetParams params;
  std::vector<InstructionRecord> records;

  std::vector<const InstructionRecord*> split(std::string_view name) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Record i draws its randomness from (params.seed, i) only.
Dataset generate_dataset(const EnvGraph& graph, const DatasetParams& params, std::string world_file,
                         std::string world_hash);

/// JSON lines: a header line, then one record per line.
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text, std::string_view source = "<dataset>");
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Throws DatasetWorldMismatch when the hash differs or a record does not fit
/// the graph.
void check_dataset_world(const Dataset& dataset, const EnvGraph& graph, std::string_view world_hash);

/// World path from the header, resolved against the dataset's directory.
std::filesystem::path resolve_world_path(const Dataset& dataset, const std::filesystem::path& dataset_path);

} // namespace blocknav
