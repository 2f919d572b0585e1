#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gazetteer {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = kFnvOffsetBasis;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace gazetteer
