#pragma once

#include "blocknav/envgraph.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace blocknav {

/// World file (JSON, version 1):
///   {"version":1,
///    "nodes":[{"id":0,"landmark":3,"features":[[...], ...]}, ...],
///    "edges":[{"from":0,"to":1,"angle_deg":90.0}, ...]}
/// `landmark` is optional. Node ids must be 0..N-1 in order. Every violation
/// is reported as MalformedGraph("<source>:<line>: <path>: <reason>").
EnvGraph parse_world(std::string_view text, std::string_view source = "<world>");
EnvGraph load_world(const std::filesystem::path& path);

/// One node or edge per line; byte-identical for identical graphs.
std::string serialize_world(const EnvGraph& graph);
void save_world(const EnvGraph& graph, const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

} // namespace blocknav
