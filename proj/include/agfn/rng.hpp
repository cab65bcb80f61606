#pragma once

#include "agfn/types.hpp"

#include <cstdint>
#include <vector>

namespace agfn {

// xoshiro256++ seeded through SplitMix64. Fixed algorithm so that a seed
// yields the same draw sequence on every platform; std::mt19937 et al. would
// tie reproducibility to the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  // Uniform on [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  Index index(Index n);
  // Standard normal via Box-Muller; second draw of each pair is cached.
  double gaussian();
  double gaussian(double mean, double stddev);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (Index i = static_cast<Index>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(index(i + 1))]);
    }
  }

  // Matrix filled with iid draws, row-major order.
  Mat gaussian_matrix(Index rows, Index cols, double stddev = 1.0);
  Mat uniform_matrix(Index rows, Index cols, double lo, double hi);

 private:
  std::uint64_t state_[4];
  double cached_gaussian_ = 0.0;
  bool has_cached_gaussian_ = false;
};

}  // namespace agfn
