#pragma once

#include "nkc/kernel_basis.hpp"
#include "nkc/mlp.hpp"
#include "nkc/types.hpp"

namespace nkc {

// Empirical score-matching objective over a batch: the per-sample sum over
// y-coordinates of half the squared first y-derivative of w(y)'h(x) plus its
// second y-derivative, averaged over the batch, plus l2_alpha * |alpha|_F^2.
// alpha is d x (B*d_y); row i holds the coefficients of w_i.
double objective_value(const Matrix& Y, const Matrix& X, const Matrix& alpha,
                       const Mlp& net, const KernelBasis& basis, double l2_alpha);

struct ObjectiveResult {
  double value = 0.0;
  Matrix grad_alpha;
  MlpGrads grad_theta;
};

ObjectiveResult objective_gradients(const Matrix& Y, const Matrix& X,
                                    const Matrix& alpha, const Mlp& net,
                                    const KernelBasis& basis, double l2_alpha);

}  // namespace nkc
