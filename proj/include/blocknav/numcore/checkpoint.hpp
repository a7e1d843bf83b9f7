#pragma once

#include "blocknav/numcore/params.hpp"

#include <filesystem>
#include <string>

namespace blocknav::nc {

/// Binary layout, little-endian:
///   "BNCK" u32 version u32 count
///   count x { u32 name_len, name, u32 rank, u32 dims[rank], f32 values }
///   u32 meta_len, meta bytes (free-form, the agent stores its config JSON)
struct Checkpoint {
  ParamStore params;
  std::string meta;
};

std::string encode_checkpoint(const ParamStore& params, const std::string& meta);
/// Throws DataError on a malformed or truncated payload.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const std::string& meta);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace blocknav::nc
