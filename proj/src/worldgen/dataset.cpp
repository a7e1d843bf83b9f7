#include "blocknav/dataset.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/rng.hpp"
#include "blocknav/world_io.hpp"

#include <json.hpp>

#include <sstream>

namespace blocknav {
namespace {

using nlohmann::json;

constexpr std::string_view kFormat = "blocknav-dataset";
constexpr int kVersion = 1;

json params_to_json(const DatasetParams& p) {
  return json{{"seed", p.seed},
              {"n_train", p.n_train},
              {"n_dev", p.n_dev},
              {"n_test", p.n_test},
              {"min_blocks", p.min_blocks},
              {"max_blocks", p.max_blocks},
              {"filler_prob", p.filler_prob},
              {"max_actions", p.max_actions}};
}

json record_to_json(const InstructionRecord& r) {
  json actions = json::array();
  for (Action a : r.gold_actions) actions.push_back(std::string(to_string(a)));
  json spans = json::array();
  for (const auto& [b, e] : r.sentence_spans) spans.push_back({b, e});
  return json{{"id", r.id},
              {"split", r.split},
              {"tokens", r.tokens},
              {"sentence_spans", spans},
              {"gold_path", r.gold_path},
              {"gold_actions", actions},
              {"initial_heading", r.initial_heading},
              {"relevance_labels", r.relevance_labels},
              {"progress_labels", r.progress_labels}};
}

// Field access that reports "<source>:<line>: <path>: <reason>".
class Reader {
public:
  Reader(std::string source, int line) : prefix_(std::move(source) + ":" + std::to_string(line) + ": ") {}

  [[noreturn]] void fail(const std::string& path, const std::string& reason) const {
    throw SchemaViolation(prefix_ + path + ": " + reason);
  }

  const json& field(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(path + "." + key, "missing field");
    return *it;
  }

  const json& array(const json& obj, const std::string& path, const char* key) const {
    const json& v = field(obj, path, key);
    if (!v.is_array()) fail(path + "." + key, "expected an array");
    return v;
  }

  std::string string(const json& obj, const std::string& path, const char* key) const {
    const json& v = field(obj, path, key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
  }

  double number(const json& obj, const std::string& path, const char* key) const {
    const json& v = field(obj, path, key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
  }

  long long integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<long long>();
  }

  std::size_t count(const json& obj, const std::string& path, const char* key) const {
    const long long v = integer(field(obj, path, key), path + "." + key);
    if (v < 0) fail(path + "." + key, "expected a nonnegative integer");
    return static_cast<std::size_t>(v);
  }

private:
  std::string prefix_;
};

DatasetParams params_from_json(const Reader& rd, const json& j) {
  const std::string path = "header.params";
  DatasetParams p;
  p.seed = static_cast<std::uint64_t>(rd.count(j, path, "seed"));
  p.n_train = rd.count(j, path, "n_train");
  p.n_dev = rd.count(j, path, "n_dev");
  p.n_test = rd.count(j, path, "n_test");
  p.min_blocks = rd.count(j, path, "min_blocks");
  p.max_blocks = rd.count(j, path, "max_blocks");
  p.filler_prob = rd.number(j, path, "filler_prob");
  p.max_actions = rd.count(j, path, "max_actions");
  return p;
}

InstructionRecord record_from_json(const Reader& rd, const json& j, const std::string& path) {
  InstructionRecord r;
  r.id = rd.string(j, path, "id");
  r.split = rd.string(j, path, "split");
  const json& tokens = rd.array(j, path, "tokens");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    r.tokens.push_back(static_cast<int>(rd.integer(tokens[i], path + ".tokens[" + std::to_string(i) + "]")));
  }
  const json& spans = rd.array(j, path, "sentence_spans");
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const std::string sp = path + ".sentence_spans[" + std::to_string(i) + "]";
    if (!spans[i].is_array() || spans[i].size() != 2) rd.fail(sp, "expected [start, end]");
    const long long b = rd.integer(spans[i][0], sp + "[0]");
    const long long e = rd.integer(spans[i][1], sp + "[1]");
    if (b < 0 || e < 0) rd.fail(sp, "negative index");
    r.sentence_spans.emplace_back(static_cast<std::size_t>(b), static_cast<std::size_t>(e));
  }
  const json& nodes = rd.array(j, path, "gold_path");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    r.gold_path.push_back(static_cast<NodeId>(rd.integer(nodes[i], path + ".gold_path[" + std::to_string(i) + "]")));
  }
  const json& actions = rd.array(j, path, "gold_actions");
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const std::string ap = path + ".gold_actions[" + std::to_string(i) + "]";
    if (!actions[i].is_string()) rd.fail(ap, "expected an action name");
    const auto a = parse_action(actions[i].get<std::string>());
    if (!a) rd.fail(ap, "unknown action '" + actions[i].get<std::string>() + "'");
    r.gold_actions.push_back(*a);
  }
  r.initial_heading = rd.number(j, path, "initial_heading");
  const json& rel = rd.array(j, path, "relevance_labels");
  for (std::size_t t = 0; t < rel.size(); ++t) {
    const std::string rp = path + ".relevance_labels[" + std::to_string(t) + "]";
    if (!rel[t].is_array()) rd.fail(rp, "expected an array");
    std::vector<std::uint8_t> row;
    for (std::size_t i = 0; i < rel[t].size(); ++i) {
      const long long v = rd.integer(rel[t][i], rp + "[" + std::to_string(i) + "]");
      if (v != 0 && v != 1) rd.fail(rp + "[" + std::to_string(i) + "]", "expected 0 or 1");
      row.push_back(static_cast<std::uint8_t>(v));
    }
    r.relevance_labels.push_back(std::move(row));
  }
  const json& prog = rd.array(j, path, "progress_labels");
  for (std::size_t t = 0; t < prog.size(); ++t) {
    const std::string pp = path + ".progress_labels[" + std::to_string(t) + "]";
    if (!prog[t].is_number()) rd.fail(pp, "expected a number");
    r.progress_labels.push_back(prog[t].get<double>());
  }
  return r;
}

} // namespace

std::vector<const InstructionRecord*> Dataset::split(std::string_view name) const {
  std::vector<const InstructionRecord*> out;
  for (const auto& r : records) {
    if (r.split == name) out.push_back(&r);
  }
  return out;
}

Dataset generate_dataset(const EnvGraph& graph, const DatasetParams& params, std::string world_file,
                         std::string world_hash) {
  int max_landmark = -1;
  for (std::size_t n = 0; n < graph.node_count(); ++n) {
    max_landmark = std::max(max_landmark, graph.landmark(static_cast<NodeId>(n)));
  }
  const Vocabulary vocab = make_vocabulary(static_cast<std::size_t>(max_landmark + 1));

  Dataset ds;
  ds.world_file = std::move(world_file);
  ds.world_hash = std::move(world_hash);
  ds.vocab = vocab.words();
  ds.params = params;

  const std::size_t total = params.n_train + params.n_dev + params.n_test;
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint64_t route_seed = rng::derive_seed(params.seed, 2 * i);
    const std::uint64_t text_seed = rng::derive_seed(params.seed, 2 * i + 1);
    const Route route = generate_route(graph, route_seed, params.min_blocks, params.max_blocks, params.max_actions);
    InstructionRecord rec = generate_instruction(graph, route, vocab, text_seed, params.filler_prob);
    rec.split = i < params.n_train ? "train" : i < params.n_train + params.n_dev ? "dev" : "test";
    const std::size_t local = rec.split == "train" ? i : rec.split == "dev" ? i - params.n_train
                                                                          : i - params.n_train - params.n_dev;
    std::ostringstream id;
    id << rec.split << "-" << local;
    rec.id = id.str();
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::string serialize_dataset(const Dataset& ds) {
  std::string out;
  json header{{"format", kFormat},
              {"version", kVersion},
              {"world_file", ds.world_file},
              {"world_hash", ds.world_hash},
              {"vocab", ds.vocab},
              {"count", ds.records.size()},
              {"params", params_to_json(ds.params)}};
  out += header.dump();
  out += '\n';
  for (const auto& r : ds.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(std::string_view text, std::string_view source) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string_view::npos) lines.pop_back();
  if (lines.empty()) throw SchemaViolation(std::string(source) + ": header: empty dataset file");

  auto parse_line = [&](std::size_t i) {
    try {
      return json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw SchemaViolation(std::string(source) + ":" + std::to_string(i + 1) + ": invalid JSON: " + e.what());
    }
  };

  Dataset ds;
  const json header = parse_line(0);
  const Reader hr(std::string(source), 1);
  if (hr.string(header, "header", "format") != kFormat) hr.fail("header.format", "not a blocknav dataset");
  if (hr.integer(hr.field(header, "header", "version"), "header.version") != kVersion) {
    hr.fail("header.version", "unsupported version");
  }
  ds.world_file = hr.string(header, "header", "world_file");
  ds.world_hash = hr.string(header, "header", "world_hash");
  const json& vocab = hr.array(header, "header", "vocab");
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (!vocab[i].is_string()) hr.fail("header.vocab[" + std::to_string(i) + "]", "expected a string");
    ds.vocab.push_back(vocab[i].get<std::string>());
  }
  const std::size_t count = hr.count(header, "header", "count");
  ds.params = params_from_json(hr, hr.field(header, "header", "params"));

  if (lines.size() - 1 != count) {
    throw SchemaViolation(std::string(source) + ": header.count: declares " + std::to_string(count) +
                          " records, file holds " + std::to_string(lines.size() - 1) +
                          (lines.size() - 1 < count ? " (truncated?)" : ""));
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const Reader rd(std::string(source), static_cast<int>(i + 1));
    ds.records.push_back(record_from_json(rd, parse_line(i), "records[" + std::to_string(i - 1) + "]"));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file(path, serialize_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file(path), path.string());
}

void check_dataset_world(const Dataset& dataset, const EnvGraph& graph, std::string_view world_hash) {
  if (dataset.world_hash != world_hash) {
    throw DatasetWorldMismatch("dataset was generated for world " + dataset.world_hash + ", got " +
                               std::string(world_hash));
  }
  for (const auto& r : dataset.records) {
    try {
      validate_record(graph, r, dataset.vocab.size());
    } catch (const SchemaViolation& e) {
      throw DatasetWorldMismatch(std::string("record does not fit the world: ") + e.what());
    }
  }
}

std::filesystem::path resolve_world_path(const Dataset& dataset, const std::filesystem::path& dataset_path) {
  const std::filesystem::path w(dataset.world_file);
  if (w.is_absolute() || !dataset_path.has_parent_path()) return w;
  return dataset_path.parent_path() / w;
}

} // namespace blocknav
