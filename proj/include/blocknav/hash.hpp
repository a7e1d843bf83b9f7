#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace blocknav {

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// "fnv1a64:<16 hex digits>"
inline std::string content_hash(std::string_view bytes) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

} // namespace blocknav
