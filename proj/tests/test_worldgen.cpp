#include "support.hpp"

#include "blocknav/dataset.hpp"
#include "blocknav/errors.hpp"
#include "blocknav/hash.hpp"
#include "blocknav/instruction.hpp"
#include "blocknav/world_io.hpp"

#include <doctest.h>

#include <set>

using namespace blocknav;

namespace {

bool all_reachable(const EnvGraph& g) {
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    if (!testing::relaxation_hops(g, 0, NodeId(v)) || !testing::relaxation_hops(g, NodeId(v), 0)) return false;
  }
  return true;
}

} // namespace

TEST_CASE("full grid keeps every street") {
  const auto g = testing::full_grid(4, 4);
  CHECK(g.node_count() == 16);
  CHECK(g.edge_count() == 48);
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
  CHECK(g.has_edge(0, 4));
  CHECK(*g.edge_slot(0, 90) < 2);
  CHECK(g.out_edges(5).size() == 4);
}

TEST_CASE("generated worlds are connected, two-way and deterministic") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const WorldParams p = testing::random_world_params(seed);
    const auto g = generate_world(p);
    CHECK(g.node_count() == p.grid_w * p.grid_h);
    CHECK(all_reachable(g));
    for (std::size_t v = 0; v < g.node_count(); ++v) {
      CHECK(g.landmark(NodeId(v)) >= 0);
      CHECK(g.landmark(NodeId(v)) < int(p.landmark_vocab_size));
      CHECK(g.features(NodeId(v)).size() == p.bins * min_feature_dim(p.landmark_vocab_size));
      for (const auto& e : g.out_edges(NodeId(v))) CHECK(g.has_edge(e.to, NodeId(v)));
    }
    CHECK(serialize_world(generate_world(p)) == serialize_world(g));
  }
  WorldParams a;
  WorldParams b;
  b.seed = 1;
  CHECK(serialize_world(generate_world(a)) != serialize_world(generate_world(b)));
}

TEST_CASE("noise-free features encode streets and landmarks") {
  WorldParams p;
  p.seed = 9;
  p.grid_w = 4;
  p.grid_h = 3;
  p.feature_noise_sigma = 0.0;
  p.d_v = min_feature_dim(p.landmark_vocab_size) + 2;
  const auto g = generate_world(p);
  const std::size_t V = p.landmark_vocab_size;
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    const auto f = g.features(NodeId(v));
    for (std::size_t bin = 0; bin < p.bins; ++bin) {
      const double* row = f.data() + bin * p.d_v;
      const Edge* street = nullptr;
      for (const auto& e : g.out_edges(NodeId(v))) {
        if (heading_bin(e.angle_deg, p.bins) == bin) street = &e;
      }
      CHECK(row[0] == (street ? 1.0 : 0.0));
      for (std::size_t l = 0; l < V; ++l) {
        const bool neighbour = street && g.landmark(street->to) == int(l);
        CHECK(row[1 + l] == (neighbour ? 1.0 : 0.0));
        CHECK(row[1 + V + l] == (g.landmark(NodeId(v)) == int(l) ? 1.0 : 0.0));
      }
      CHECK(row[1 + 2 * V] == 0.0);
      CHECK(row[2 + 2 * V] == 0.0);
    }
  }
}

TEST_CASE("bad world parameters are refused") {
  WorldParams p;
  p.d_v = min_feature_dim(p.landmark_vocab_size) - 1;
  CHECK_THROWS_AS(generate_world(p), GenerationFailed);
  p = {};
  p.edge_keep_prob = 0.0;
  CHECK_THROWS_AS(generate_world(p), GenerationFailed);
  p = {};
  p.grid_w = 0;
  CHECK_THROWS_AS(generate_world(p), GenerationFailed);
}

TEST_CASE("routes replay through the simulator") {
  const auto g = generate_world(WorldParams{});
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t lo = 1 + seed % 2;
    const std::size_t hi = lo + seed % 3;
    const Route r = generate_route(g, seed, lo, hi);
    REQUIRE(!r.actions.empty());
    CHECK(r.actions.back() == Action::Stop);
    CHECK(r.legs.size() >= lo);
    CHECK(r.legs.size() <= hi);
    CHECK(std::set<NodeId>(r.path.begin(), r.path.end()).size() == r.path.size());

    AgentState s = initial_state(g, r.path.front(), r.initial_heading);
    std::vector<NodeId> visited{s.node};
    for (std::size_t t = 0; t + 1 < r.actions.size(); ++t) {
      CHECK(r.actions[t] != Action::Stop);
      s = *step(g, s, r.actions[t]);
      if (r.actions[t] == Action::Forward) visited.push_back(s.node);
    }
    CHECK(visited == r.path);
    CHECK(r.legs.back().end_node == r.path.back());
    CHECK(r.legs.front().first_step == 0);
    CHECK(r.legs.back().last_step == r.actions.size() - 2);
    for (std::size_t k = 1; k < r.legs.size(); ++k) CHECK(r.legs[k].first_step == r.legs[k - 1].last_step + 1);
  }
  CHECK_THROWS_AS(generate_route(g, 0, 3, 2), RouteFailed);
  CHECK_THROWS_AS(generate_route(g, 0, 1, 2, 1), RouteFailed);
}

TEST_CASE("one-leg instruction without fillers has two sentences") {
  const auto g = generate_world(WorldParams{});
  const Vocabulary vocab = make_vocabulary(8);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Route r = generate_route(g, seed, 1, 1);
    const auto rec = generate_instruction(g, r, vocab, seed, 0.0);
    CHECK(rec.sentence_count() == 2);
    CHECK(vocab.decode(rec.tokens).substr(vocab.decode(rec.tokens).size() - 6) == "stop .");
    CHECK(rec.relevance_labels.size() == rec.steps());
    CHECK(rec.relevance_labels.back() == std::vector<std::uint8_t>{0, 1});
  }
}

TEST_CASE("instruction records are consistent with their routes") {
  const auto g = generate_world(WorldParams{});
  const Vocabulary vocab = make_vocabulary(8);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Route r = generate_route(g, seed, 1, 3);
    const auto rec = generate_instruction(g, r, vocab, seed + 100, 0.5);
    CHECK_NOTHROW(validate_record(g, rec, vocab.size()));
    // spans tile the tokens and each sentence ends with "."
    std::size_t at = 0;
    for (const auto& [b, e] : rec.sentence_spans) {
      CHECK(b == at);
      CHECK(e > b);
      CHECK(vocab.word(rec.tokens[e - 1]) == ".");
      at = e;
    }
    CHECK(at == rec.tokens.size());
    for (const auto& row : rec.relevance_labels) {
      CHECK(row.size() == rec.sentence_count());
      int ones = 0;
      for (auto x : row) ones += x;
      CHECK(ones == 1);
    }
    CHECK(rec.progress_labels ==
          progress_labels_for(g, rec.gold_path.front(), rec.initial_heading, rec.gold_actions));
    // relevance of a sentence is one contiguous run of steps
    for (std::size_t i = 0; i < rec.sentence_count(); ++i) {
      int runs = 0;
      for (std::size_t t = 0; t < rec.steps(); ++t) {
        if (rec.relevance_labels[t][i] && (t == 0 || !rec.relevance_labels[t - 1][i])) ++runs;
      }
      CHECK(runs <= 1);
    }
    auto broken = rec;
    broken.progress_labels.pop_back();
    CHECK_THROWS_AS(validate_record(g, broken, vocab.size()), LabelLengthMismatch);
  }
}

TEST_CASE("vocabulary encodes and decodes") {
  const Vocabulary v = make_vocabulary(3);
  CHECK(v.size() == 20);
  CHECK(v.decode(v.encode("turn left at the cafe .")) == "turn left at the cafe .");
  CHECK_THROWS_AS(v.encode("fly to the moon"), SchemaViolation);
  CHECK(landmark_name(40) == "landmark40");
}

TEST_CASE("dataset round trip, determinism and errors") {
  const auto g = generate_world(WorldParams{});
  const std::string hash = content_hash(serialize_world(g));
  DatasetParams p;
  p.n_train = 12;
  p.n_dev = 3;
  p.n_test = 5;
  const Dataset ds = generate_dataset(g, p, "w.json", hash);
  CHECK(ds.records.size() == 20);
  CHECK(ds.split("dev").size() == 3);
  CHECK(ds.split("test").front()->id == "test-0");

  const std::string text = serialize_dataset(ds);
  CHECK(parse_dataset(text) == ds);
  CHECK(serialize_dataset(generate_dataset(g, p, "w.json", hash)) == text);
  CHECK_NOTHROW(check_dataset_world(ds, g, hash));
  CHECK_THROWS_AS(check_dataset_world(ds, g, "fnv1a64:0000000000000000"), DatasetWorldMismatch);

  // record i only depends on (seed, i)
  DatasetParams fewer = p;
  fewer.n_train = 6;
  fewer.n_dev = 0;
  fewer.n_test = 0;
  const Dataset small = generate_dataset(g, fewer, "w.json", hash);
  for (std::size_t i = 0; i < 6; ++i) CHECK(small.records[i] == ds.records[i]);

  const std::string truncated = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  try {
    parse_dataset(truncated, "d.jsonl");
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  std::string bad = text;
  bad.replace(bad.find("\"FORWARD\""), 9, "\"JUMP\"");
  CHECK_THROWS_AS(parse_dataset(bad, "d.jsonl"), SchemaViolation);

  // a gold path that disagrees with its actions
  Dataset other = ds;
  other.records[0].gold_path.back() = other.records[0].gold_path.front();
  CHECK_THROWS_AS(check_dataset_world(other, g, hash), DatasetWorldMismatch);
}
