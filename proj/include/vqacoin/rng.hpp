#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace vqacoin {

/// Deterministic random stream. Wraps std::mt19937_64 (fully specified by the
/// standard) but derives all distributions by hand, because the std
/// distribution objects are implementation-defined and would break the
/// byte-identical-dataset guarantee across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  /// Independent substream: hashes (seed, path words) into a fresh seed.
  /// Lets callers decouple draw order between unrelated generation steps.
  static Rng derive(uint64_t seed, std::initializer_list<uint64_t> path);

  /// The seed derive() would construct its stream from, for callers that
  /// store or forward seeds rather than streams.
  static uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> path);

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling: unbiased
  /// and portable.
  int64_t uniform_int(int64_t lo, int64_t hi);

  /// Gaussian via Box-Muller (no cached spare; two uniforms per draw).
  double normal(double mu, double sigma);

  /// Fisher-Yates over [0, n), deterministic given the stream state.
  std::vector<size_t> permutation(size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace vqacoin
