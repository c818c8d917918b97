#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace provhunt {

/// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; throws Error(IoFailure).
std::string sha256_file(const std::string& path);

}  // namespace provhunt
