#pragma once

#include <cstdint>
#include <string>

namespace ctig {

// FNV-1a, used for content-addressing artifacts in run manifests.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hash_hex(uint64_t h);
std::string hash_file(const std::string& path);

}  // namespace ctig
