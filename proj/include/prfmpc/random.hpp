#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace prfmpc {

/// Deterministic random stream: a seeded mt19937_64 source with uniform and
/// standard-normal draws. The normal variates are produced by an explicit
/// Box-Muller transform rather than std::normal_distribution, whose output
/// sequence is implementation-defined; this keeps streams reproducible from
/// the seed alone.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal draw. Consumes two uniforms per pair; the second
  /// variate of each pair is cached.
  double normal();

  Eigen::Vector2d normal2() {
    const double a = normal();
    const double b = normal();
    return {a, b};
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Splitmix64-style mix of a base seed and a stream index. Trial i of a batch
/// with base seed s uses derive_seed(s, i), so any runner that partitions
/// trials across threads reproduces the exact same streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace prfmpc
