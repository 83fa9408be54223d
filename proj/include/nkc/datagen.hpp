#pragma once

#include <array>
#include <vector>

#include "nkc/dataset.hpp"
#include "nkc/types.hpp"

namespace nkc {

// Three-component Gaussian mixture in y whose component means are random
// leaky-ReLU networks of x. x ~ N(0, I), equal weights, component std 0.25.
class MixtureGenerator {
 public:
  static constexpr double kComponentStd = 0.25;
  static constexpr int kComponents = 3;
  static constexpr double kLeakySlope = 0.2;

  MixtureGenerator(Index d_x, std::uint64_t seed);

  Index dx() const { return dx_; }
  std::uint64_t seed() const { return seed_; }

  // Component means, one column per component.
  Matrix component_means(const Matrix& X) const;

  // Optionally reports the drawn component per row for oracle checks.
  Dataset sample(Index T, std::uint64_t sample_seed,
                 std::vector<int>* components = nullptr) const;

  // Exact log p(y|x) of the generating mixture, log-sum-exp stabilized.
  double true_cond_loglik(double y, const RowVector& x) const;
  Vector true_cond_loglik(const Vector& y, const Matrix& X) const;

 private:
  Index dx_;
  std::uint64_t seed_;
  std::array<std::array<Matrix, 3>, kComponents> nets_;  // [component][layer]
};

// 1-D linear-Gaussian toy: x ~ N(0, I), y = a'x + noise_std * eps.
Dataset sample_linear_gaussian(const Vector& a, double noise_std, Index T,
                               std::uint64_t seed);

// Direction with |a|^2 = 0.75 so that y has unit variance at noise_std = 0.5.
Vector toy_direction(Index d_x, std::uint64_t seed);

}  // namespace nkc
