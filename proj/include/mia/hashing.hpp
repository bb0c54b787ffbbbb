#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mia {

// FNV-1a, 64-bit. Used for feature hashing, cache keys and template
// fingerprints; must stay stable across platforms and releases.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t value);

}  // namespace mia
