#pragma once

#include <vector>

#include "nkc/rng.hpp"
#include "nkc/types.hpp"

namespace nkc {

enum class OutAct { linear, relu };

struct MlpGrads {
  std::vector<Matrix> W;
  std::vector<Vector> b;
};

// Feedforward ReLU network; rows of the input are samples.
class Mlp {
 public:
  std::vector<Matrix> W;  // W[l] is dims[l+1] x dims[l]
  std::vector<Vector> b;
  OutAct out_act = OutAct::linear;

  // He-scaled weights (std sqrt(2/fan_in)), zero biases.
  static Mlp init(const std::vector<Index>& dims, OutAct act, Rng& rng);

  struct Cache {
    std::vector<Matrix> z;  // pre-activations per layer
    std::vector<Matrix> a;  // a[0] = input, a[l+1] = activation of layer l
  };

  Matrix forward(const Matrix& X) const;
  Matrix forward(const Matrix& X, Cache& cache) const;

  // Gradient of sum_n grad_h(n,:) . h(x_n) with respect to parameters.
  MlpGrads backward(const Cache& cache, const Matrix& grad_h) const;

  MlpGrads zero_grads() const;
  Index param_count() const;
  Index in_dim() const { return W.empty() ? 0 : W.front().cols(); }
  Index out_dim() const { return W.empty() ? 0 : W.back().rows(); }
  std::vector<Index> layer_dims() const;
};

}  // namespace nkc
