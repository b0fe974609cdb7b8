#pragma once

#include <cstdint>
#include <string_view>

namespace dyttp {

/// SplitMix64 generator. The output stream is fully specified by the seed, so
/// datasets, initializations and checkpoints reproduce bit-for-bit across
/// platforms. Normal draws use Box-Muller on top of it rather than
/// <random>'s implementation-defined distributions.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64";

  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Independent generator keyed by `stream`; does not advance this one.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t state) { state_ = state; }

 private:
  std::uint64_t state_;
};

/// The SplitMix64 finalizer, usable as a standalone 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace dyttp
