#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lope {

using Rng = std::mt19937_64;

// Raised when a component is wired up with unusable configuration
// (empty pools, untrained models, bad bands, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised on shape/length mismatches between records that must align.
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// FNV-1a, used to derive deterministic seeds from text.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 step; decorrelates a base seed and a salt.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

// Shared by every advantage computation so identical inputs give identical bits.
inline MeanStd mean_and_pop_std(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

}  // namespace lope
