#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace lootcrawl {

/// SplitMix64 finalizer; used to decorrelate seeds before they reach the engine.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (base seed, stream tag, index).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(stream)) + index);
}

// Stream tags. Values are arbitrary but frozen: changing them changes every seeded run.
namespace streams {
inline constexpr std::uint64_t kMap = 0x6d6170;
inline constexpr std::uint64_t kCombat = 0x636f6d;
inline constexpr std::uint64_t kAgent = 0x61676e;
inline constexpr std::uint64_t kOpponent = 0x6f7070;
inline constexpr std::uint64_t kInit = 0x696e69;
inline constexpr std::uint64_t kEquip = 0x657175;
inline constexpr std::uint64_t kSession = 0x736573;
}  // namespace streams

/// Platform-stable random stream. The engine is std::mt19937_64 (fully
/// specified by the standard); the distributions are implemented here because
/// the std:: distributions are implementation-defined.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [lo, hi] (inclusive), unbiased.
  int uniform_int(int lo, int hi);

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<int>(n) - 1)); }

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

inline int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
  // Rejection sampling on the largest multiple of span.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % span);
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<int>(lo + static_cast<std::int64_t>(draw % span));
}

}  // namespace lootcrawl
