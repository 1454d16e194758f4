#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace evbench {

/// SplitMix64 step; used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  return splitmix64(parent ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Seeded generator with platform-independent bounded draws. The standard
/// distributions are implementation-defined, so they are avoided wherever a
/// result has to be bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform in [lo, hi] inclusive.
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi) { return lo + below(hi - lo + 1); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  void fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i + 8 <= out.size()) {
      std::uint64_t x = engine_();
      for (int k = 0; k < 8; ++k) out[i++] = static_cast<std::uint8_t>(x >> (8 * k));
    }
    if (i < out.size()) {
      std::uint64_t x = engine_();
      for (int k = 0; k < 8 && i < out.size(); ++k) out[i++] = static_cast<std::uint8_t>(x >> (8 * k));
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace evbench
