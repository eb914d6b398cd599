#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace epiq {

using Rng = std::mt19937_64;

/// Draws `n` child seeds from a master seed before any work is spawned, so that
/// per-task streams do not depend on execution order.
inline std::vector<std::uint64_t> derive_seeds(std::uint64_t master, std::size_t n) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
  Rng rng(seq);
  std::vector<std::uint64_t> seeds(n);
  for (auto& s : seeds) s = rng();
  return seeds;
}

/// Seed for a named sub-task (a model, a county), stable across runs and platforms:
/// FNV-1a of the name mixed with the master seed.
inline std::uint64_t named_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return derive_seeds(master ^ h, 1).front();
}

/// Uniform double in [0, 1) built from the top 53 bits; independent of the
/// standard library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace epiq
