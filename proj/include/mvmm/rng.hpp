#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace mvmm {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// FNV-1a, used to turn stream names into integer tags.
constexpr std::uint64_t hash_tag(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Derives an independent seed for the stream identified by `path` under
/// `base`. Streams never depend on how many draws other streams made, so
/// work split across threads reproduces the sequential results.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(base);
  for (auto tag : path) s = splitmix64(s ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(base, path));
}

}  // namespace mvmm
