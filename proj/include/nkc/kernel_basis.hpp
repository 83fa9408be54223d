#pragma once

#include <vector>

#include "nkc/types.hpp"

namespace nkc {

// Gaussian-kernel derivative feature basis. Feature b of block j is the
// partial derivative of k(y, c_b) = exp(-|y - c_b|^2 / (2 sigma^2)) with
// respect to the center coordinate j, giving feature dimension B * d_y
// with column layout j * B + b.
struct KernelBasis {
  Matrix centers;  // B x d_y
  double sigma = 1.0;

  Index center_count() const { return centers.rows(); }
  Index dy() const { return centers.cols(); }
  Index feature_dim() const { return centers.rows() * centers.cols(); }
};

// Batched evaluations; Y is N x d_y, rows are samples.
Matrix kb_features(const KernelBasis& basis, const Matrix& Y);

// Entry l of the result holds d/dy_l of every feature: N x (B*d_y).
std::vector<Matrix> kb_feature_jacobian(const KernelBasis& basis, const Matrix& Y);

// Entry l holds d^2/dy_l^2 of every feature (mixed terms not needed).
std::vector<Matrix> kb_feature_laplacian(const KernelBasis& basis, const Matrix& Y);

// All three in one pass over the shared kernel matrix.
struct KbBundle {
  Matrix feat;
  std::vector<Matrix> jac;
  std::vector<Matrix> lap;
};
KbBundle kb_bundle(const KernelBasis& basis, const Matrix& Y,
                   bool want_features = true);

// Single-point forms.
Vector features(const KernelBasis& basis, const Vector& y);
Matrix feature_jacobian(const KernelBasis& basis, const Vector& y);
Matrix feature_laplacian_rows(const KernelBasis& basis, const Vector& y);

}  // namespace nkc
