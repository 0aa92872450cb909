#pragma once

#include <cstdint>
#include <vector>

namespace avsd {

// xoshiro256** seeded through splitmix64. Every consumer owns its generator;
// there is no process-wide random state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  int range(int lo, int hi_inclusive) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }
  // Standard normal via Box-Muller. Implemented here rather than through
  // std::normal_distribution so the stream is identical across standard libraries.
  double normal();

  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  // Derive an independent stream from this seed and a tag.
  static Rng derive(std::uint64_t seed, std::uint64_t tag);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace avsd
