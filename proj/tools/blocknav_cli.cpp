#include "blocknav/dataset.hpp"
#include "blocknav/errors.hpp"
#include "blocknav/harness/ablation.hpp"
#include "blocknav/harness/evaluate.hpp"
#include "blocknav/harness/report.hpp"
#include "blocknav/harness/train.hpp"
#include "blocknav/hash.hpp"
#include "blocknav/world_io.hpp"
#include "blocknav/worldgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blocknav;

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
}

void echo(const std::string& command, const json& config) {
  std::cerr << command << " config: " << config.dump() << "\n";
}

fs::path results_root(const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("BLOCKNAV_RESULTS_DIR"); env && *env) return env;
  return "results";
}

// --- world / dataset params -------------------------------------------------

json to_json(const WorldParams& p) {
  return json{{"seed", p.seed},
              {"grid_w", p.grid_w},
              {"grid_h", p.grid_h},
              {"edge_keep_prob", p.edge_keep_prob},
              {"landmark_vocab_size", p.landmark_vocab_size},
              {"feature_noise_sigma", p.feature_noise_sigma},
              {"d_v", p.d_v},
              {"bins", p.bins}};
}

template <class T>
T field(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw DataError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw DataError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw DataError("config: " + key + " has the wrong type");
  }
}

WorldParams world_params_from_json(const json& j, WorldParams p) {
  if (!j.is_object()) throw DataError("world config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "seed") p.seed = field<std::uint64_t>(v, k);
    else if (k == "grid_w") p.grid_w = field<std::size_t>(v, k);
    else if (k == "grid_h") p.grid_h = field<std::size_t>(v, k);
    else if (k == "edge_keep_prob") p.edge_keep_prob = field<double>(v, k);
    else if (k == "landmark_vocab_size") p.landmark_vocab_size = field<std::size_t>(v, k);
    else if (k == "feature_noise_sigma") p.feature_noise_sigma = field<double>(v, k);
    else if (k == "d_v") p.d_v = field<std::size_t>(v, k);
    else if (k == "bins") p.bins = field<std::size_t>(v, k);
    else throw DataError("world config: unknown key '" + k + "'");
  }
  return p;
}

json to_json(const DatasetParams& p) {
  return json{{"seed", p.seed},         {"n_train", p.n_train},       {"n_dev", p.n_dev},
              {"n_test", p.n_test},     {"min_blocks", p.min_blocks}, {"max_blocks", p.max_blocks},
              {"filler_prob", p.filler_prob}, {"max_actions", p.max_actions}};
}

DatasetParams dataset_params_from_json(const json& j, DatasetParams p) {
  if (!j.is_object()) throw DataError("dataset config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "seed") p.seed = field<std::uint64_t>(v, k);
    else if (k == "n_train") p.n_train = field<std::size_t>(v, k);
    else if (k == "n_dev") p.n_dev = field<std::size_t>(v, k);
    else if (k == "n_test") p.n_test = field<std::size_t>(v, k);
    else if (k == "min_blocks") p.min_blocks = field<std::size_t>(v, k);
    else if (k == "max_blocks") p.max_blocks = field<std::size_t>(v, k);
    else if (k == "filler_prob") p.filler_prob = field<double>(v, k);
    else if (k == "max_actions") p.max_actions = field<std::size_t>(v, k);
    else throw DataError("dataset config: unknown key '" + k + "'");
  }
  return p;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto w = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto h = std::stoul(s.substr(x + 1), &used);
    if (used != s.size() - x - 1) throw std::invalid_argument(s);
    return {w, h};
  } catch (const std::logic_error&) {
    throw UsageError("--grid expects WxH, got '" + s + "'");
  }
}

// --- loaded inputs --------------------------------------------------------------

struct Inputs {
  Dataset dataset;
  EnvGraph world;
  fs::path world_path;
};

Inputs load_inputs(const std::string& data_path, const std::string& world_flag) {
  Dataset ds = load_dataset(data_path);
  const fs::path world_path = world_flag.empty() ? resolve_world_path(ds, data_path) : fs::path(world_flag);
  const std::string world_text = read_file(world_path);
  EnvGraph world = parse_world(world_text, world_path.string());
  check_dataset_world(ds, world, content_hash(world_text));
  return Inputs{std::move(ds), std::move(world), world_path};
}

void check_agent_fits(const agent::AgentConfig& a, const Inputs& in) {
  if (a.d_v != in.world.feature_dim() || a.bins != in.world.bins() || a.vocab_size != in.dataset.vocab.size()) {
    throw DataError("agent config (d_v " + std::to_string(a.d_v) + ", bins " + std::to_string(a.bins) +
                    ", vocab " + std::to_string(a.vocab_size) + ") does not fit the data (d_v " +
                    std::to_string(in.world.feature_dim()) + ", bins " + std::to_string(in.world.bins()) +
                    ", vocab " + std::to_string(in.dataset.vocab.size()) + ")");
  }
}

std::vector<const InstructionRecord*> require_split(const Dataset& ds, const std::string& split) {
  if (split != "train" && split != "dev" && split != "test") {
    throw UsageError("--split must be train, dev or test");
  }
  return ds.split(split);
}

// --- options --------------------------------------------------------------------

struct Options {
  std::uint64_t seed = 0;
  std::string config;
  std::string world;
  std::string data;
  std::string out;
  std::string ckpt;
  std::string split = "test";
  std::string grid;
  std::string k;
  std::string ablate_grid = "overall";
  std::string svg;
  std::string episode;
  std::string run_id;
  std::size_t seeds = 3;
  std::optional<std::size_t> epochs;
};

// --- commands -------------------------------------------------------------------

int cmd_gen_world(const Options& o, const CLI::App& sub) {
  WorldParams p;
  if (!o.config.empty()) p = world_params_from_json(read_json_file(o.config), p);
  if (sub.count("--seed")) p.seed = o.seed;
  if (!o.grid.empty()) std::tie(p.grid_w, p.grid_h) = parse_grid(o.grid);
  echo("gen-world", to_json(p));
  const EnvGraph world = generate_world(p);
  save_world(world, o.out);
  std::cerr << "wrote " << o.out << " (" << world.node_count() << " nodes, " << world.edge_count() << " edges, "
            << world.blocks().block_count() << " blocks)\n";
  return 0;
}

int cmd_gen_data(const Options& o, const CLI::App& sub) {
  DatasetParams p;
  if (!o.config.empty()) p = dataset_params_from_json(read_json_file(o.config), p);
  if (sub.count("--seed")) p.seed = o.seed;
  echo("gen-data", to_json(p));
  const std::string world_text = read_file(o.world);
  const EnvGraph world = parse_world(world_text, o.world);
  const fs::path out_dir = fs::absolute(o.out).parent_path();
  const std::string world_ref = fs::absolute(o.world).lexically_normal().lexically_relative(out_dir).generic_string();
  const Dataset ds = generate_dataset(world, p, world_ref, content_hash(world_text));
  save_dataset(ds, o.out);
  std::cerr << "wrote " << o.out << " (" << ds.records.size() << " episodes)\n";
  return 0;
}

harness::TrainConfig resolve_train_config(const Options& o, const CLI::App& sub, const Inputs* in) {
  harness::TrainConfig c;
  if (in) {
    c.agent.d_v = in->world.feature_dim();
    c.agent.bins = in->world.bins();
    c.agent.vocab_size = in->dataset.vocab.size();
  }
  if (!o.config.empty()) {
    try {
      c = harness::train_config_from_json(read_json_file(o.config), c);
    } catch (const DataError&) {
      throw;
    } catch (const Error& e) {
      throw DataError(o.config + ": " + e.what());
    }
  }
  if (sub.count("--seed")) c.seed = o.seed;
  if (!o.data.empty()) c.data = o.data;
  if (!o.world.empty()) c.world = o.world;
  if (o.epochs) c.epochs = *o.epochs;
  return c;
}

Inputs inputs_for(const harness::TrainConfig& c) {
  if (c.data.empty()) throw UsageError("no dataset: pass --data or set \"data\" in the config");
  return load_inputs(c.data, c.world);
}

int cmd_train(const Options& o, const CLI::App& sub) {
  harness::TrainConfig c = resolve_train_config(o, sub, nullptr);
  const Inputs in = inputs_for(c);
  // Data-derived dimensions apply unless the config file sets them.
  c = resolve_train_config(o, sub, &in);
  echo("train", harness::to_json(c));
  c.agent.validate();
  check_agent_fits(c.agent, in);

  const auto train_eps = in.dataset.split("train");
  const auto eval_eps = require_split(in.dataset, o.split);
  const std::string run_id = o.run_id.empty() ? "train-s" + std::to_string(c.seed) : o.run_id;
  const fs::path dir = results_root(o.out) / run_id;

  const harness::TrainResult trained = harness::train(c, in.world, train_eps, [](const harness::EpochLog& e) {
    std::cerr << harness::to_json(e).dump() << "\n";
  });
  const harness::EvalResult eval = harness::evaluate(trained.model, in.world, eval_eps, c.tc_rule);
  const harness::MetricsRow row{run_id, o.split, eval.tc, eval.spd, eval.sed, c.seed, harness::config_hash(c)};
  harness::write_run(dir, c, trained, eval, row);
  std::cout << harness::metrics_csv({row});
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const Options& o, const CLI::App&) {
  const agent::Model model = harness::load_model(o.ckpt);
  harness::TrainConfig c;
  c.agent = model.config();
  const fs::path cfg_path = fs::path(o.ckpt).parent_path() / "config.json";
  if (fs::exists(cfg_path)) c = harness::train_config_from_json(read_json_file(cfg_path.string()), c);
  if (!o.data.empty()) c.data = o.data;
  if (!o.world.empty()) c.world = o.world;
  c.agent = model.config();
  echo("eval", json{{"ckpt", o.ckpt}, {"split", o.split}, {"train_config", harness::to_json(c)}});
  const Inputs in = inputs_for(c);
  check_agent_fits(c.agent, in);
  const auto eps = require_split(in.dataset, o.split);
  const harness::EvalResult eval = harness::evaluate(model, in.world, eps, c.tc_rule);
  const std::string run_id = o.run_id.empty() ? "eval-" + o.split : o.run_id;
  const fs::path dir = results_root(o.out) / run_id;
  const harness::MetricsRow row{run_id, o.split, eval.tc, eval.spd, eval.sed, c.seed, harness::config_hash(c)};
  write_file(dir / "metrics.csv", harness::metrics_csv({row}));
  write_file(dir / "episodes.csv", harness::episodes_csv(eval));
  for (const auto& [name, svg] : harness::complexity_plots(eval)) write_file(dir / "plots" / name, svg);
  std::cout << harness::metrics_csv({row});
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_ablate(const Options& o, const CLI::App& sub) {
  harness::TrainConfig c = resolve_train_config(o, sub, nullptr);
  const Inputs in = inputs_for(c);
  c = resolve_train_config(o, sub, &in);
  c.agent.validate();
  check_agent_fits(c.agent, in);

  std::vector<harness::Grid> grids;
  if (!o.k.empty()) {
    grids.push_back(harness::k_grid(c.agent, harness::parse_k_list(o.k)));
  } else {
    std::vector<std::string> names;
    if (o.ablate_grid == "all") {
      names = harness::grid_names();
    } else {
      std::size_t start = 0;
      while (true) {
        const auto comma = o.ablate_grid.find(',', start);
        names.push_back(o.ablate_grid.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    for (const auto& n : names) {
      auto g = harness::named_grid(n, c.agent);
      if (!g) throw UsageError("unknown --ablate-grid '" + n + "'");
      grids.push_back(std::move(*g));
    }
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(c.seed + i);

  json grid_names = json::array();
  for (const auto& g : grids) grid_names.push_back(g.name);
  echo("ablate", json{{"grids", grid_names}, {"seeds", seeds}, {"split", o.split}, {"base", harness::to_json(c)}});

  const auto train_eps = in.dataset.split("train");
  const auto eval_eps = require_split(in.dataset, o.split);
  const fs::path root = results_root(o.out);
  bool any_failed = false;
  for (const auto& grid : grids) {
    const fs::path grid_dir = root / ("ablate-" + grid.name);
    const auto suite = harness::run_ablation_suite(
        grid, c, seeds, in.world, train_eps, eval_eps, o.split, [&](const harness::RunArtifacts& a) {
          const harness::MetricsRow row{a.outcome.run_id, o.split,  a.eval.tc,
                                        a.eval.spd,       a.eval.sed, a.outcome.seed,
                                        a.outcome.config_hash};
          harness::write_run(grid_dir / a.outcome.run_id, a.config, a.trained, a.eval, row);
          std::cerr << a.outcome.run_id << ": tc " << a.eval.tc << " spd " << a.eval.spd << " sed " << a.eval.sed
                    << "\n";
        });
    const std::string table = harness::markdown_table(suite);
    write_file(grid_dir / "metrics.csv", harness::metrics_csv(harness::metrics_rows(suite)));
    write_file(grid_dir / "table.md", table);
    std::cout << table << "\n";
    for (const auto& r : suite.runs) any_failed = any_failed || !r.result;
  }
  return any_failed ? 3 : 0;
}

int cmd_inspect(const Options& o, const CLI::App&) {
  if (o.ckpt.empty() && o.world.empty() && o.data.empty()) {
    throw UsageError("inspect needs --ckpt, --world or --data");
  }
  if (!o.ckpt.empty()) {
    const agent::Model model = harness::load_model(o.ckpt);
    std::cout << "agent config: " << agent::to_json(model.config()).dump() << "\n";
    std::size_t count = 0;
    count = model.params().total_size();
    std::cout << "parameters: " << model.params().size() << " tensors, " << count << " values\n";
    for (const auto& line : model.describe()) std::cout << "  " << line << "\n";
  }
  if (!o.world.empty()) {
    const EnvGraph w = load_world(o.world);
    std::cout << "world: " << w.node_count() << " nodes, " << w.edge_count() << " edges, "
              << w.blocks().block_count() << " blocks, " << w.bins() << " bins x " << w.feature_dim()
              << " features\n";
  }
  if (!o.data.empty()) {
    const Dataset ds = load_dataset(o.data);
    std::cout << "dataset: " << ds.records.size() << " episodes (train " << ds.split("train").size() << ", dev "
              << ds.split("dev").size() << ", test " << ds.split("test").size() << "), vocabulary "
              << ds.vocab.size() << ", world " << ds.world_file << "\n";
  }
  return 0;
}

int cmd_trace(const Options& o, const CLI::App&) {
  const agent::Model model = harness::load_model(o.ckpt);
  std::string data = o.data;
  std::string world = o.world;
  const fs::path cfg_path = fs::path(o.ckpt).parent_path() / "config.json";
  if (fs::exists(cfg_path)) {
    const auto c = harness::train_config_from_json(read_json_file(cfg_path.string()));
    if (data.empty()) data = c.data;
    if (world.empty()) world = c.world;
  }
  if (data.empty()) throw UsageError("trace needs --data");
  echo("trace", json{{"ckpt", o.ckpt}, {"data", data}, {"world", world}, {"episode", o.episode}});
  const Inputs in = load_inputs(data, world);
  check_agent_fits(model.config(), in);
  const InstructionRecord* rec = nullptr;
  for (const auto& r : in.dataset.records) {
    if (r.id == o.episode) rec = &r;
  }
  if (!rec) throw DataError("no episode '" + o.episode + "' in " + data);
  const agent::EpisodeTrace trace = agent::rollout(model, in.world, *rec);
  const std::string out = harness::trace_json(trace, *rec).dump(2) + "\n";
  if (o.out.empty()) std::cout << out;
  else write_file(o.out, out);
  if (!o.svg.empty()) write_file(o.svg, harness::trace_svg(trace, *rec));
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-aware instruction following on synthetic street graphs", "blocknav"};
  app.require_subcommand(1);
  Options o;

  auto* gen_world = app.add_subcommand("gen-world", "Generate a random street world");
  gen_world->add_option("--seed", o.seed, "Random seed");
  gen_world->add_option("--grid", o.grid, "Grid size WxH");
  gen_world->add_option("--config", o.config, "World parameters (JSON)");
  gen_world->add_option("--out", o.out, "Output world file")->required();

  auto* gen_data = app.add_subcommand("gen-data", "Generate an instruction dataset for a world");
  gen_data->add_option("--seed", o.seed, "Random seed");
  gen_data->add_option("--config", o.config, "Dataset parameters (JSON)");
  gen_data->add_option("--world", o.world, "World file")->required();
  gen_data->add_option("--out", o.out, "Output dataset file (JSON lines)")->required();

  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Training seed");
    sub->add_option("--config", o.config, "Training config (JSON)");
    sub->add_option("--world", o.world, "World file (default: from the dataset header)");
    sub->add_option("--data", o.data, "Dataset file");
    sub->add_option("--out", o.out, "Results root (default: $BLOCKNAV_RESULTS_DIR or ./results)");
    sub->add_option("--split", o.split, "Evaluation split: train, dev or test");
    sub->add_option("--epochs", o.epochs, "Override the number of epochs");
  };

  auto* train = app.add_subcommand("train", "Train an agent and evaluate it");
  add_train_flags(train);
  train->add_option("--run-id", o.run_id, "Run directory name");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  eval->add_option("--world", o.world, "World file");
  eval->add_option("--data", o.data, "Dataset file");
  eval->add_option("--split", o.split, "Split: train, dev or test");
  eval->add_option("--out", o.out, "Results root");
  eval->add_option("--run-id", o.run_id, "Run directory name");

  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid over several seeds");
  add_train_flags(ablate);
  ablate->add_option("--ablate-grid", o.ablate_grid, "overall, bal, k, spatial, hsa, a comma list, or all");
  ablate->add_option("--k", o.k, "K values for the long-term angle sweep, e.g. 1..5");
  ablate->add_option("--seeds", o.seeds, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect", "Describe a checkpoint, world or dataset");
  inspect->add_option("--ckpt", o.ckpt, "Checkpoint file");
  inspect->add_option("--world", o.world, "World file");
  inspect->add_option("--data", o.data, "Dataset file");

  auto* trace = app.add_subcommand("trace", "Export the rollout of one episode");
  trace->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  trace->add_option("--data", o.data, "Dataset file (default: from the run config)");
  trace->add_option("--world", o.world, "World file");
  trace->add_option("--episode", o.episode, "Episode id")->required();
  trace->add_option("--out", o.out, "JSON output file (default: stdout)");
  trace->add_option("--svg", o.svg, "SVG output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*gen_world) return cmd_gen_world(o, *gen_world);
    if (*gen_data) return cmd_gen_data(o, *gen_data);
    if (*train) return cmd_train(o, *train);
    if (*eval) return cmd_eval(o, *eval);
    if (*ablate) return cmd_ablate(o, *ablate);
    if (*inspect) return cmd_inspect(o, *inspect);
    if (*trace) return cmd_trace(o, *trace);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
