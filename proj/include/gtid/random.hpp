#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace gtid {

/// Seeded pseudo-random source used by every stochastic component.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than through
/// <random>'s distribution classes, whose algorithms are
/// implementation-defined, so that a seed produces the same stream on any
/// conforming toolchain.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal draw (Box-Muller, one value per pair of uniforms).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::vector<Eigen::Index> permutation(Eigen::Index n);

private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Per-stage seed derived from a master seed: mix64(master ^ mix64(stage + 1)).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stage);

/// Stage indices used with derive_seed by the command-line pipeline.
namespace stage {
inline constexpr std::uint64_t data = 0;
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t gan = 2;
inline constexpr std::uint64_t augment = 3;
inline constexpr std::uint64_t classifier = 4;
} // namespace stage

} // namespace gtid
