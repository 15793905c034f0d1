#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <string_view>

namespace hms {

// 64-bit FNV-1a. Used to derive seeds from identifiers and to hash configs.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64_bytes(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 finalizer; derives an independent child seed from (seed, stream).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic sampling built on std::mt19937_64. The engine itself is fully
// specified by the standard; the standard distributions are not, so the
// distributions are implemented here to keep streams identical across
// standard libraries.
class rng {
 public:
  explicit rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return lo + uniform01() * (hi - lo);
  }

  // Uniform on [lo, hi] in log space; requires lo, hi > 0.
  double log_uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // Uniform integer on [lo, hi], inclusive, rejection-sampled to avoid bias.
  long long uniform_int(long long lo, long long hi) {
    if (lo == hi) return lo;
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const std::uint64_t rem =
        (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
    std::uint64_t r = engine_();
    while (rem != 0 && r >= std::uint64_t(0) - rem) r = engine_();
    return lo + static_cast<long long>(r % span);
  }

  // Box-Muller; two engine draws per sample, no cached state.
  double normal(double mean, double sd) {
    const double u1 =
        (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    return mean +
           sd * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hms
