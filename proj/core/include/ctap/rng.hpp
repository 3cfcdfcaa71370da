#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>

namespace ctap {

/// Seeded generator with a platform-independent stream.
///
/// Raw bits come from std::mt19937_64, whose output sequence is fixed by the standard. Uniform and
/// normal variates are derived here rather than through <random> distributions, whose algorithms
/// are implementation-defined. Normals use the polar Box-Muller transform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Deterministically mixes a base seed with stream keys (splitmix64 finalizer), so that
/// per-episode or per-tree generators are independent of scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

}  // namespace ctap
