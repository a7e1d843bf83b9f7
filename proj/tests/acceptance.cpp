// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "support.hpp"

#include "blocknav/agent/episode.hpp"
#include "blocknav/dataset.hpp"
#include "blocknav/harness/ablation.hpp"
#include "blocknav/harness/evaluate.hpp"
#include "blocknav/harness/report.hpp"
#include "blocknav/harness/train.hpp"
#include "blocknav/hash.hpp"
#include "blocknav/numcore/gradcheck.hpp"
#include "blocknav/rng.hpp"
#include "blocknav/world_io.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace blocknav;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

agent::AgentConfig fit(agent::AgentConfig c, const EnvGraph& world, const Dataset& data) {
  c.d_v = world.feature_dim();
  c.bins = world.bins();
  c.vocab_size = data.vocab.size();
  return c;
}

Dataset make_data(const EnvGraph& world, std::uint64_t seed, std::size_t n_train, std::size_t n_test) {
  DatasetParams p;
  p.seed = seed;
  p.n_train = n_train;
  p.n_test = n_test;
  return generate_dataset(world, p, "world.json", content_hash(serialize_world(world)));
}

// --- criteria -------------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const EnvGraph world = generate_world(WorldParams{});
  const Dataset data = make_data(world, 0, 200, 0);
  const InstructionRecord* toy = nullptr;
  for (const auto& r : data.records) {
    if (r.steps() == 3 && r.sentence_count() >= 2) {
      toy = &r;
      break;
    }
  }
  if (!toy) return {false, "no 3-step episode in the toy data"};

  agent::AgentConfig base;
  base.d = 8;
  base.d_t = 8;
  base.dim_timestep = 4;
  base.dim_action = 4;
  base.dim_junction = 4;
  base.heads = 2;
  base = fit(base, world, data);

  std::map<std::string, std::pair<std::string, agent::AgentConfig>> configs;
  for (const auto& name : harness::grid_names()) {
    const auto grid = *harness::named_grid(name, base);
    for (std::size_t v = 0; v < grid.variants.size(); ++v) {
      const auto& c = grid.variants[v].agent;
      configs.emplace(agent::to_json(c).dump(), std::make_pair(name + "#" + std::to_string(v + 1), c));
    }
  }
  std::size_t checked = 0;
  double worst = 0.0;
  std::string failures;
  std::uint64_t seed = 0;
  for (const auto& [key, named] : configs) {
    agent::Model m(named.second, ++seed);
    nc::GradCheckOptions opt;
    opt.h = 1e-5;
    opt.tolerance = 1e-3;
    opt.fraction = 0.05;
    opt.seed = seed;
    const auto report = nc::grad_check(m.params(), [&](nc::Graph& g) {
      return agent::teacher_forced(m, g, world, *toy).loss.total;
    }, opt);
    checked += report.checked;
    worst = std::max(worst, report.max_rel_err);
    if (!report.passed()) failures += " " + named.first + ": " + report.summary();
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures.empty() && secs < 60.0;
  o.detail = std::to_string(configs.size()) + " configurations, " + std::to_string(checked) +
             " entries, max rel err " + fmt(worst, 8) + ", " + fmt(secs) + " s" + failures;
  return o;
}

Outcome block_label_oracle() {
  const auto path = testing::path_graph(6);
  const double worked = block_progress_label(path, initial_state(path, 2, 90));
  std::size_t pairs = 0;
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EnvGraph g = generate_world(testing::random_world_params(1000 + seed));
    const testing::WalkOracle oracle{g};
    for (std::size_t v = 0; v < g.node_count(); ++v) {
      const auto n = static_cast<NodeId>(v);
      for (const auto& e : g.out_edges(n)) {
        ++pairs;
        if (block_progress_label(g, initial_state(g, n, e.angle_deg)) != oracle.label(n, e.angle_deg)) ++mismatches;
      }
    }
  }
  Outcome o;
  o.pass = mismatches == 0 && worked == 0.6;
  o.detail = std::to_string(pairs) + " (node, heading) pairs on 100 worlds, " + std::to_string(mismatches) +
             " mismatches; worked example 3/5 -> " + fmt(worked, 6);
  return o;
}

// Edit distance by its recursive definition, memoised per pair.
std::size_t recursive_ed(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    const auto key = std::make_pair(i, j);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    const std::size_t r = a[i] == b[j] ? go(i + 1, j + 1)
                                       : 1 + std::min({go(i + 1, j), go(i, j + 1), go(i + 1, j + 1)});
    memo[key] = r;
    return r;
  };
  return go(0, 0);
}

std::vector<std::vector<NodeId>> all_sequences(std::size_t alphabet, std::size_t max_len) {
  std::vector<std::vector<NodeId>> out{{}};
  std::vector<std::vector<NodeId>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<NodeId>> next;
    for (const auto& s : frontier) {
      for (std::size_t c = 0; c < alphabet; ++c) {
        auto t = s;
        t.push_back(NodeId(c));
        next.push_back(t);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

Outcome metric_oracles() {
  std::string problems;
  rng::Engine eng(77);
  const EnvGraph w = generate_world(testing::random_world_params(42));
  std::size_t spd_bad = 0;
  for (int i = 0; i < 100; ++i) {
    const auto u = static_cast<NodeId>(rng::uniform_index(eng, w.node_count()));
    const auto v = static_cast<NodeId>(rng::uniform_index(eng, w.node_count()));
    if (harness::metric_spd(w, u, v) != testing::relaxation_hops(w, u, v)) ++spd_bad;
  }
  if (spd_bad) problems += " spd mismatches " + std::to_string(spd_bad);

  std::size_t sed_pairs = 0;
  std::size_t sed_bad = 0;
  for (const auto& [alphabet, len] : {std::pair<std::size_t, std::size_t>{2, 8}, {3, 5}}) {
    const auto seqs = all_sequences(alphabet, len);
    for (const auto& a : seqs) {
      for (const auto& b : seqs) {
        ++sed_pairs;
        const std::size_t ed = recursive_ed(a, b);
        const std::size_t longest = std::max(a.size(), b.size());
        const double expected = longest == 0 ? 1.0 : 1.0 - double(ed) / double(longest);
        if (harness::edit_distance(a, b) != ed || harness::metric_sed(a, b, true) != expected ||
            harness::metric_sed(a, b, false) != 0.0) {
          ++sed_bad;
        }
      }
    }
  }
  if (sed_bad) problems += " sed mismatches " + std::to_string(sed_bad);

  std::size_t episodes = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const EnvGraph g = generate_world(testing::random_world_params(200 + seed));
    const Dataset d = make_data(g, seed, 40, 10);
    agent::AgentConfig c = fit(agent::AgentConfig{}, g, d);
    c.d = 8;
    c.d_t = 8;
    c.heads = 2;
    const agent::Model m(c, seed);
    std::vector<harness::EpisodeRow> rows;
    for (const auto& rec : d.records) {
      const auto trace = agent::rollout(m, g, rec, [&](std::size_t t, const AgentState&) {
        return std::optional<Action>(rec.gold_actions[t]);
      });
      rows.push_back(harness::score_episode(g, rec, trace, harness::TcRule::Exact));
    }
    episodes += rows.size();
    const auto r = harness::aggregate(rows);
    if (r.tc != 100.0 || r.spd != 0.0 || r.sed != 1.0) problems += " gold replay not perfect on world " + std::to_string(seed);
  }
  Outcome o;
  o.pass = problems.empty();
  o.detail = "100 SPD pairs, " + std::to_string(sed_pairs) + " exhaustive SED pairs, gold replay on " +
             std::to_string(episodes) + " episodes" + problems;
  return o;
}

Outcome attention_properties() {
  const EnvGraph world = generate_world(WorldParams{});
  const Dataset data = make_data(world, 5, 30, 0);
  agent::AgentConfig c = fit(agent::AgentConfig{}, world, data);
  const agent::Model m(c, 3);
  double worst_sum = 0.0;
  std::size_t distributions = 0;
  for (const auto& rec : data.records) {
    nc::Graph g(&m.params(), false);
    agent::Episode ep(m, g, world, rec.tokens, rec.sentence_spans);
    AgentState s = initial_state(world, rec.gold_path.front(), rec.initial_heading);
    for (std::size_t t = 0; t < rec.steps(); ++t) {
      const auto out = ep.step(s);
      for (const nc::Tensor* w : {&out.sentence_weights, &out.token_weights, &out.visual_weights}) {
        for (std::size_t h = 0; h < w->rows(); ++h) {
          double total = 0;
          for (double v : w->row(h)) total += v;
          worst_sum = std::max(worst_sum, std::abs(total - 1.0));
          ++distributions;
        }
      }
      ep.set_previous_action(rec.gold_actions[t]);
      if (rec.gold_actions[t] != Action::Stop) s = *step(world, s, rec.gold_actions[t]);
    }
  }

  rng::Engine eng(9);
  bool identity = true;
  bool annihilation = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ns = 1 + rng::uniform_index(eng, 4);
    agent::Spans spans;
    std::size_t at = 0;
    for (std::size_t i = 0; i < ns; ++i) {
      const std::size_t len = 1 + rng::uniform_index(eng, 4);
      spans.emplace_back(at, at + len);
      at += len;
    }
    nc::Tensor I({at, 6});
    for (double& v : I.data()) v = rng::uniform(eng, -2, 2);
    nc::Graph g;
    const auto Iv = g.constant(I);
    if (!(agent::apply_token_mask(Iv, g.constant(nc::Tensor(std::vector<std::size_t>{ns}, 1.0)), spans).value() == I)) {
      identity = false;
    }
    const std::size_t off = rng::uniform_index(eng, ns);
    nc::Tensor r(std::vector<std::size_t>{ns}, 1.0);
    r[off] = 0.0;
    const nc::Tensor masked = agent::apply_token_mask(Iv, g.constant(r), spans).value();
    for (std::size_t row = 0; row < at; ++row) {
      const bool inside = row >= spans[off].first && row < spans[off].second;
      for (std::size_t col = 0; col < 6; ++col) {
        if (masked.at(row, col) != (inside ? 0.0 : I.at(row, col))) annihilation = false;
      }
    }
  }

  double worst_shift = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng::uniform_index(eng, 12);
    nc::Tensor x({n});
    for (double& v : x.data()) v = rng::uniform(eng, -30, 30);
    nc::Tensor y = x;
    const double c0 = rng::uniform(eng, -100, 100);
    for (double& v : y.data()) v += c0;
    nc::Graph g;
    const nc::Tensor p = nc::softmax(g.constant(x)).value();
    const nc::Tensor q = nc::softmax(g.constant(y)).value();
    for (std::size_t i = 0; i < n; ++i) worst_shift = std::max(worst_shift, std::abs(p[i] - q[i]));
  }

  Outcome o;
  o.pass = worst_sum <= 1e-9 && identity && annihilation && worst_shift <= 1e-12;
  o.detail = std::to_string(distributions) + " distributions, max |sum - 1| " + fmt(worst_sum * 1e15, 3) +
             "e-15; mask identity " + (identity ? "ok" : "broken") + ", annihilation " +
             (annihilation ? "ok" : "broken") + "; softmax shift max diff " + fmt(worst_shift * 1e15, 3) + "e-15";
  return o;
}

Outcome overfit() {
  const EnvGraph world = generate_world(WorldParams{});
  std::ostringstream detail;
  bool pass = true;
  for (std::uint64_t seed : {0, 1, 2}) {
    const auto t0 = Clock::now();
    const Dataset data = make_data(world, 100 + seed, 16, 0);
    harness::TrainConfig c;
    c.agent = fit(agent::AgentConfig{}, world, data);
    c.seed = seed;
    c.epochs = 300;
    c.lr = 1e-3;
    c.batch_size = 4;
    c.eval_every = 5;
    c.target_train_tc = 90.0;
    const auto eps = data.split("train");
    const auto r = harness::train(c, world, eps);
    const double tc = harness::evaluate(r.model, world, eps).tc;
    const double secs = seconds_since(t0);
    const bool ok = tc >= 90.0 && secs < 300.0;
    pass = pass && ok;
    detail << (seed ? "; " : "") << "seed " << seed << ": TC " << fmt(tc, 1) << "% after " << r.log.size()
           << " epochs, " << fmt(secs, 1) << " s";
  }
  return {pass, detail.str()};
}

Outcome generalization() {
  const auto t0 = Clock::now();
  const EnvGraph world = generate_world(WorldParams{});
  const Dataset data = make_data(world, 1, 200, 50);
  harness::TrainConfig c;
  c.agent = fit(agent::AgentConfig{}, world, data);
  c.epochs = 80;
  c.lr = 1e-3;
  c.batch_size = 8;
  const auto grid = harness::overall_grid(c.agent);
  const auto suite = harness::run_ablation_suite(grid, c, {0, 1, 2}, world, data.split("train"), data.split("test"),
                                                 "test");
  std::cout << harness::markdown_table(suite) << std::flush;
  for (const auto& r : suite.runs) {
    if (!r.result) return {false, r.run_id + " failed: " + r.error};
  }
  const double base = suite.summary[0].tc.mean;
  const double bal = suite.summary[1].tc.mean;
  const double sap = suite.summary[2].tc.mean;
  const double full = suite.summary[3].tc.mean;
  Outcome o;
  o.pass = full >= std::max(bal, sap) && std::max(bal, sap) >= base;
  o.detail = "mean TC baseline " + fmt(base, 1) + ", BAL " + fmt(bal, 1) + ", SAP " + fmt(sap, 1) + ", full " +
             fmt(full, 1) + " (" + fmt(seconds_since(t0), 0) + " s)";
  return o;
}

int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(BLOCKNAV_CLI) + "' " + args +
                          " >>'" + (dir / "cli.log").string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("blocknav_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  write_file(dir / "dc.json", "{\"n_train\": 24, \"n_test\": 8}");
  write_file(dir / "tc.json", "{\"epochs\": 3, \"lr\": 0.001}");
  if (run_cli(dir, "gen-world --seed 11 --out w.json") != 0 ||
      run_cli(dir, "gen-data --world w.json --config dc.json --seed 12 --out d.jsonl") != 0 ||
      run_cli(dir, "train --config tc.json --data d.jsonl --seed 3 --out a --run-id run") != 0 ||
      run_cli(dir, "train --config tc.json --data d.jsonl --seed 3 --out b --run-id run") != 0) {
    return {false, "CLI failed, see " + (dir / "cli.log").string()};
  }
  const bool ckpt = read_file(dir / "a/run/checkpoint.bin") == read_file(dir / "b/run/checkpoint.bin");
  const bool csv = read_file(dir / "a/run/metrics.csv") == read_file(dir / "b/run/metrics.csv");
  const bool log = read_file(dir / "a/run/log.jsonl") == read_file(dir / "b/run/log.jsonl");
  Outcome o{ckpt && csv && log, std::string("checkpoint ") + (ckpt ? "identical" : "differs") + ", metrics.csv " +
                                    (csv ? "identical" : "differs") + ", log " + (log ? "identical" : "differs")};
  if (o.pass) fs::remove_all(dir);
  return o;
}

Outcome k_sweep() {
  const fs::path dir = scratch("ksweep");
  write_file(dir / "dc.json", "{\"n_train\": 8, \"n_test\": 4}");
  write_file(dir / "tc.json", "{\"epochs\": 1, \"agent\": {\"d\": 16, \"d_t\": 16, \"heads\": 2}}");
  if (run_cli(dir, "gen-world --seed 5 --out w.json") != 0 ||
      run_cli(dir, "gen-data --world w.json --config dc.json --out d.jsonl") != 0 ||
      run_cli(dir, "ablate --k 1..5 --seeds 1 --config tc.json --data d.jsonl --out res") != 0) {
    return {false, "CLI failed, see " + (dir / "cli.log").string()};
  }
  const std::string table = read_file(dir / "res/ablate-k/table.md");
  std::cout << table << std::flush;
  bool rows_ok = table.find("| Value of K |") != std::string::npos;
  for (int k = 1; k <= 5; ++k) {
    const std::string row = "| " + std::to_string(k) + " | " + std::to_string(k) + (k == 3 ? " (default)" : "") + " |";
    rows_ok = rows_ok && table.find(row) != std::string::npos;
  }
  const auto metrics = harness::parse_metrics_csv(read_file(dir / "res/ablate-k/metrics.csv"));
  Outcome o{rows_ok && metrics.size() == 5,
            std::to_string(metrics.size()) + " runs; rows K=1..5 " + (rows_ok ? "present, K=3 marked default" : "malformed")};
  if (o.pass) fs::remove_all(dir);
  return o;
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-integrity", gradient_integrity}, {"block-label-oracle", block_label_oracle},
      {"metric-oracles", metric_oracles},         {"attention-mask-properties", attention_properties},
      {"overfit", overfit},                       {"generalization-direction", generalization},
      {"determinism", determinism},               {"k-sweep", k_sweep},
  };
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) only.insert(argv[i]);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  return failed ? 1 : 0;
}
