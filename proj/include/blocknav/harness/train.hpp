#pragma once

#include "blocknav/agent/model.hpp"
#include "blocknav/harness/metrics.hpp"
#include "blocknav/instruction.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace blocknav::harness {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  double grad_clip_norm = 5.0;
  /// Evaluate greedy rollouts on the training episodes every n epochs (0: never).
  std::size_t eval_every = 0;
  /// Stop once a periodic training evaluation reaches this TC (percent; 0: off).
  double target_train_tc = 0.0;
  TcRule tc_rule = TcRule::Adjacent;
  std::string world;
  std::string data;
  agent::AgentConfig agent;
};

nlohmann::json to_json(const TrainConfig& c);
/// Starts from `base` and overrides the keys present; "agent" is merged key
/// by key. Unknown keys throw Error.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
/// "fnv1a64:..." of the canonical JSON of the config.
std::string config_hash(const TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  double l_ap = 0.0;
  double l_bal = 0.0;
  double l_hsa = 0.0;
  double l_total = 0.0;
  double grad_norm = 0.0;
  std::optional<double> train_tc;
};

nlohmann::json to_json(const EpochLog& e);

struct TrainResult {
  agent::Model model;
  std::vector<EpochLog> log;
};

/// Teacher-forced training with Adam on per-batch mean gradients. Losses in
/// the log are per-episode means. The final parameters are rounded to
/// float32 so the in-memory model equals its checkpoint.
TrainResult train(const TrainConfig& config, const EnvGraph& world,
                  const std::vector<const InstructionRecord*>& episodes,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Checkpoint with the agent config as metadata.
void save_model(const std::filesystem::path& path, const agent::Model& model);
std::string encode_model(const agent::Model& model);
/// Throws DataError when the file or its config is malformed.
agent::Model load_model(const std::filesystem::path& path);

} // namespace blocknav::harness
