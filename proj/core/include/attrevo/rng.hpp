#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace attrevo {

/// Seeded generator behind every random decision in a run.
///
/// Distributions are implemented here rather than taken from <random> so a
/// given seed yields the same stream on every standard library; the engine
/// state can be captured with state() and restored with from_state().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Standard normal via Box-Muller (no cached spare, so state stays simple).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  [[nodiscard]] std::string state() const;
  static Rng from_state(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

/// Stable 64-bit FNV-1a; used for cache keys and per-prompt seeding.
std::uint64_t fnv1a(std::string_view data,
                    std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// splitmix64 finalizer, for combining seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace attrevo
