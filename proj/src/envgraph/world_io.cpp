#include "blocknav/world_io.hpp"

#include "blocknav/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace blocknav {
namespace {

using nlohmann::json;

// Line on which each object element of the top-level "nodes" and "edges"
// arrays starts. nlohmann does not track positions of parsed values.
struct ElementLines {
  std::vector<int> nodes;
  std::vector<int> edges;
};

ElementLines scan_element_lines(std::string_view text) {
  ElementLines out;
  int line = 1;
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  std::string current;
  std::string last_key;
  std::vector<int>* array = nullptr;
  for (char c : text) {
    if (c == '\n') ++line;
    if (in_string) {
      if (escape) {
        escape = false;
      } else if (c == '\\') {
        escape = true;
      } else if (c == '"') {
        in_string = false;
        if (depth == 1) last_key = current;
      } else {
        current.push_back(c);
      }
      continue;
    }
    switch (c) {
    case '"':
      in_string = true;
      current.clear();
      break;
    case '{':
      if (depth == 2 && array) array->push_back(line);
      ++depth;
      break;
    case '[':
      if (depth == 1) array = last_key == "nodes" ? &out.nodes : last_key == "edges" ? &out.edges : nullptr;
      ++depth;
      break;
    case '}':
    case ']':
      --depth;
      if (depth == 1) array = nullptr;
      break;
    default:
      break;
    }
  }
  return out;
}

int line_of_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

class Reporter {
public:
  Reporter(std::string_view source, ElementLines lines) : source_(source), lines_(std::move(lines)) {}

  [[noreturn]] void fail(int line, const std::string& path, const std::string& reason) const {
    throw MalformedGraph(source_ + ":" + std::to_string(line) + ": " + path + ": " + reason);
  }
  int node_line(std::size_t i) const { return i < lines_.nodes.size() ? lines_.nodes[i] : 0; }
  int edge_line(std::size_t i) const { return i < lines_.edges.size() ? lines_.edges[i] : 0; }

private:
  std::string source_;
  ElementLines lines_;
};

} // namespace

EnvGraph parse_world(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw MalformedGraph(std::string(source) + ":" + std::to_string(line_of_offset(text, e.byte)) +
                         ": invalid JSON: " + e.what());
  }
  const Reporter rep(source, scan_element_lines(text));

  if (!doc.is_object()) rep.fail(1, "$", "expected an object");
  if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"].get<int>() != 1) {
    rep.fail(1, "version", "expected version 1");
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) rep.fail(1, "nodes", "expected an array");
  if (!doc.contains("edges") || !doc["edges"].is_array()) rep.fail(1, "edges", "expected an array");

  const json& nodes = doc["nodes"];
  const json& edges = doc["edges"];
  if (nodes.empty()) rep.fail(1, "nodes", "world has no nodes");

  std::size_t bins = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> features;
  std::vector<int> landmarks;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const json& nd = nodes[i];
    const int line = rep.node_line(i);
    const std::string path = "nodes[" + std::to_string(i) + "]";
    if (!nd.is_object()) rep.fail(line, path, "expected an object");
    if (!nd.contains("id") || !nd["id"].is_number_integer()) rep.fail(line, path + ".id", "expected an integer");
    if (nd["id"].get<long long>() != static_cast<long long>(i)) {
      rep.fail(line, path + ".id", "node ids must be 0..N-1 in order, expected " + std::to_string(i));
    }
    int landmark = -1;
    if (nd.contains("landmark")) {
      if (!nd["landmark"].is_number_integer()) rep.fail(line, path + ".landmark", "expected an integer");
      landmark = nd["landmark"].get<int>();
    }
    if (!nd.contains("features") || !nd["features"].is_array() || nd["features"].empty()) {
      rep.fail(line, path + ".features", "expected a non-empty array of rows");
    }
    const json& rows = nd["features"];
    if (i == 0) {
      bins = rows.size();
      if (!rows[0].is_array() || rows[0].empty()) rep.fail(line, path + ".features[0]", "expected a non-empty row");
      dim = rows[0].size();
    }
    if (rows.size() != bins) {
      rep.fail(line, path + ".features", "expected " + std::to_string(bins) + " rows, got " + std::to_string(rows.size()));
    }
    std::vector<double> flat;
    flat.reserve(bins * dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string rpath = path + ".features[" + std::to_string(r) + "]";
      if (!rows[r].is_array() || rows[r].size() != dim) {
        rep.fail(line, rpath, "expected " + std::to_string(dim) + " values");
      }
      for (const json& v : rows[r]) {
        if (!v.is_number()) rep.fail(line, rpath, "expected numbers");
        flat.push_back(v.get<double>());
      }
    }
    features.push_back(std::move(flat));
    landmarks.push_back(landmark);
  }

  EnvGraph::Builder builder(bins, dim);
  for (std::size_t i = 0; i < features.size(); ++i) builder.add_node(std::move(features[i]), landmarks[i]);

  std::map<std::pair<long long, double>, std::size_t> seen;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const json& ed = edges[i];
    const int line = rep.edge_line(i);
    const std::string path = "edges[" + std::to_string(i) + "]";
    if (!ed.is_object()) rep.fail(line, path, "expected an object");
    for (const char* key : {"from", "to"}) {
      if (!ed.contains(key) || !ed[key].is_number_integer()) rep.fail(line, path + "." + key, "expected an integer");
      const long long id = ed[key].get<long long>();
      if (id < 0 || static_cast<std::size_t>(id) >= nodes.size()) {
        rep.fail(line, path + "." + key, "references unknown node " + std::to_string(id));
      }
    }
    if (!ed.contains("angle_deg") || !ed["angle_deg"].is_number()) {
      rep.fail(line, path + ".angle_deg", "expected a number");
    }
    const double angle = ed["angle_deg"].get<double>();
    if (!(angle > -180.0 && angle <= 180.0)) {
      rep.fail(line, path + ".angle_deg", "angle " + std::to_string(angle) + " outside (-180, 180]");
    }
    const long long from = ed["from"].get<long long>();
    auto [it, inserted] = seen.emplace(std::make_pair(from, angle), i);
    if (!inserted) {
      rep.fail(line, path + ".angle_deg",
               "duplicate angle at node " + std::to_string(from) + " (also edges[" + std::to_string(it->second) + "])");
    }
    builder.add_edge(static_cast<NodeId>(from), static_cast<NodeId>(ed["to"].get<long long>()), angle);
  }
  return std::move(builder).build();
}

EnvGraph load_world(const std::filesystem::path& path) {
  return parse_world(read_file(path), path.string());
}

std::string serialize_world(const EnvGraph& graph) {
  std::ostringstream out;
  out << "{\n\"version\": 1,\n\"nodes\": [\n";
  const std::size_t dim = graph.feature_dim();
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto id = static_cast<NodeId>(i);
    json node;
    node["id"] = i;
    if (graph.landmark(id) >= 0) node["landmark"] = graph.landmark(id);
    json rows = json::array();
    const auto f = graph.features(id);
    for (std::size_t r = 0; r < graph.bins(); ++r) {
      rows.push_back(std::vector<double>(f.begin() + static_cast<std::ptrdiff_t>(r * dim),
                                         f.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim)));
    }
    node["features"] = std::move(rows);
    out << node.dump() << (i + 1 < graph.node_count() ? ",\n" : "\n");
  }
  out << "],\n\"edges\": [\n";
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    for (const Edge& e : graph.out_edges(static_cast<NodeId>(i))) {
      json edge;
      edge["from"] = i;
      edge["to"] = e.to;
      edge["angle_deg"] = e.angle_deg;
      lines.push_back(edge.dump());
    }
  }
  for (std::size_t i = 0; i < lines.size(); ++i) out << lines[i] << (i + 1 < lines.size() ? ",\n" : "\n");
  out << "]\n}\n";
  return out.str();
}

void save_world(const EnvGraph& graph, const std::filesystem::path& path) {
  write_file(path, serialize_world(graph));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

} // namespace blocknav
