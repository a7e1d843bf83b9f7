#include "blocknav/harness/train.hpp"

#include "blocknav/agent/episode.hpp"
#include "blocknav/errors.hpp"
#include "blocknav/hash.hpp"
#include "blocknav/harness/evaluate.hpp"
#include "blocknav/numcore/adam.hpp"
#include "blocknav/numcore/checkpoint.hpp"
#include "blocknav/rng.hpp"
#include "blocknav/world_io.hpp"

#include <numeric>

namespace blocknav::harness {

using nlohmann::json;

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"seed", c.seed},
              {"grad_clip_norm", c.grad_clip_norm},
              {"eval_every", c.eval_every},
              {"target_train_tc", c.target_train_tc},
              {"tc_rule", std::string(to_string(c.tc_rule))},
              {"world", c.world},
              {"data", c.data},
              {"agent", agent::to_json(c.agent)}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  if (!j.is_object()) throw Error("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto need_uint = [&] {
      if (!value.is_number_integer() || value.get<std::int64_t>() < 0) throw Error("train config: " + key + " must be a nonnegative integer");
      return value.get<std::uint64_t>();
    };
    auto need_number = [&] {
      if (!value.is_number()) throw Error("train config: " + key + " must be a number");
      return value.get<double>();
    };
    auto need_string = [&] {
      if (!value.is_string()) throw Error("train config: " + key + " must be a string");
      return value.get<std::string>();
    };
    if (key == "epochs") base.epochs = need_uint();
    else if (key == "batch_size") base.batch_size = need_uint();
    else if (key == "lr") base.lr = need_number();
    else if (key == "beta1") base.beta1 = need_number();
    else if (key == "beta2") base.beta2 = need_number();
    else if (key == "eps") base.eps = need_number();
    else if (key == "seed") base.seed = need_uint();
    else if (key == "grad_clip_norm") base.grad_clip_norm = need_number();
    else if (key == "eval_every") base.eval_every = need_uint();
    else if (key == "target_train_tc") base.target_train_tc = need_number();
    else if (key == "tc_rule") {
      const auto rule = parse_tc_rule(need_string());
      if (!rule) throw Error("train config: tc_rule must be 'exact' or 'adjacent'");
      base.tc_rule = *rule;
    } else if (key == "world") base.world = need_string();
    else if (key == "data") base.data = need_string();
    else if (key == "agent") base.agent = agent::agent_config_from_json(value, base.agent);
    else throw Error("train config: unknown key '" + key + "'");
  }
  if (base.batch_size == 0) throw Error("train config: batch_size must be positive");
  return base;
}

std::string config_hash(const TrainConfig& c) {
  return content_hash(to_json(c).dump());
}

json to_json(const EpochLog& e) {
  json j{{"epoch", e.epoch},     {"l_ap", e.l_ap},   {"l_bal", e.l_bal},
         {"l_hsa", e.l_hsa},     {"l_total", e.l_total}, {"grad_norm", e.grad_norm}};
  if (e.train_tc) j["train_tc"] = *e.train_tc;
  return j;
}

TrainResult train(const TrainConfig& config, const EnvGraph& world,
                  const std::vector<const InstructionRecord*>& episodes,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  if (episodes.empty()) throw Error("no training episodes");
  TrainResult result{agent::Model(config.agent, rng::derive_seed(config.seed, 0)), {}};
  agent::Model& model = result.model;
  nc::Adam adam(model.params(), {config.lr, config.beta1, config.beta2, config.eps});

  std::vector<std::size_t> order(episodes.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng::Engine eng(rng::derive_seed(config.seed, epoch));
    rng::shuffle(order, eng);

    EpochLog log;
    log.epoch = epoch;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<nc::Tensor> grads = model.params().zeros_like();
      for (std::size_t k = begin; k < end; ++k) {
        const InstructionRecord& rec = *episodes[order[k]];
        nc::Graph g(&model.params());
        const agent::TeacherForced tf = agent::teacher_forced(model, g, world, rec);
        g.backward(tf.loss.total);
        g.accumulate_param_gradients(grads);
        log.l_ap += tf.loss.ap;
        log.l_bal += tf.loss.bal;
        log.l_hsa += tf.loss.hsa;
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (auto& t : grads) {
        for (double& v : t.data()) v *= inv;
      }
      log.grad_norm = nc::clip_global_norm(grads, config.grad_clip_norm);
      adam.step(model.params(), grads);
    }
    const double n = static_cast<double>(episodes.size());
    log.l_ap /= n;
    log.l_bal /= n;
    log.l_hsa /= n;
    log.l_total = log.l_ap + log.l_bal + log.l_hsa;

    const bool last = epoch == config.epochs;
    if (config.eval_every > 0 && (epoch % config.eval_every == 0 || last)) {
      log.train_tc = evaluate(model, world, episodes, config.tc_rule).tc;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (config.target_train_tc > 0.0 && log.train_tc && *log.train_tc >= config.target_train_tc) break;
  }
  model.params().round_to_float32();
  return result;
}

std::string encode_model(const agent::Model& model) {
  return nc::encode_checkpoint(model.params(), agent::to_json(model.config()).dump());
}

void save_model(const std::filesystem::path& path, const agent::Model& model) {
  write_file(path, encode_model(model));
}

agent::Model load_model(const std::filesystem::path& path) {
  nc::Checkpoint ck = nc::load_checkpoint(path);
  agent::AgentConfig config;
  try {
    config = agent::agent_config_from_json(json::parse(ck.meta));
    config.validate();
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(path.string() + ": bad agent config in checkpoint: " + e.what());
  }
  try {
    return agent::Model(config, std::move(ck.params));
  } catch (const Error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

} // namespace blocknav::harness
