#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nkc/types.hpp"

namespace nkc {

// Deterministic RNG built on mt19937_64 with hand-rolled variate
// transforms. The standard library's distribution objects are not
// required to produce identical streams across implementations, so
// uniform/normal sampling is done here explicitly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller; caches the second variate.
  double normal();

  // Unbiased integer on [0, n) by rejection.
  Index uniform_index(Index n);

  std::vector<Index> permutation(Index n);

  // k distinct indices from [0, n), by partial Fisher-Yates.
  std::vector<Index> choice(Index n, Index k);

  Vector normal_vector(Index n);
  Matrix normal_matrix(Index rows, Index cols);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a base seed and stream tags.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace nkc
