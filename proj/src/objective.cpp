#include "nkc/objective.hpp"

#include <stdexcept>

namespace nkc {

namespace {

void check_batch(const Matrix& Y, const Matrix& X, const Matrix& alpha,
                 const Mlp& net, const KernelBasis& basis) {
  if (Y.rows() == 0) throw std::invalid_argument("objective: empty batch");
  if (Y.rows() != X.rows()) throw std::invalid_argument("objective: y/x row mismatch");
  if (Y.cols() != basis.dy()) throw std::invalid_argument("objective: y dimension mismatch");
  if (X.cols() != net.in_dim()) throw std::invalid_argument("objective: x dimension mismatch");
  if (alpha.rows() != net.out_dim() || alpha.cols() != basis.feature_dim())
    throw std::invalid_argument("objective: alpha shape mismatch");
}

}  // namespace

double objective_value(const Matrix& Y, const Matrix& X, const Matrix& alpha,
                       const Mlp& net, const KernelBasis& basis, double l2_alpha) {
  check_batch(Y, X, alpha, net, basis);
  const Index N = Y.rows();
  const Index dy = basis.dy();
  const Matrix H = net.forward(X);  // N x d
  const KbBundle kb = kb_bundle(basis, Y, false);

  double value = 0.0;
  for (Index j = 0; j < dy; ++j) {
    const Matrix MA = kb.jac[static_cast<std::size_t>(j)] * alpha.transpose();  // N x d
    const Matrix QA = kb.lap[static_cast<std::size_t>(j)] * alpha.transpose();
    const Vector s = MA.cwiseProduct(H).rowwise().sum();
    const Vector u = QA.cwiseProduct(H).rowwise().sum();
    value += 0.5 * s.squaredNorm() + u.sum();
  }
  return value / static_cast<double>(N) + l2_alpha * alpha.squaredNorm();
}

ObjectiveResult objective_gradients(const Matrix& Y, const Matrix& X,
                                    const Matrix& alpha, const Mlp& net,
                                    const KernelBasis& basis, double l2_alpha) {
  check_batch(Y, X, alpha, net, basis);
  const Index N = Y.rows();
  const Index dy = basis.dy();
  const double inv_n = 1.0 / static_cast<double>(N);

  Mlp::Cache cache;
  const Matrix H = net.forward(X, cache);
  const KbBundle kb = kb_bundle(basis, Y, false);

  double value = 0.0;
  Matrix grad_h = Matrix::Zero(N, H.cols());
  Matrix grad_alpha = Matrix::Zero(alpha.rows(), alpha.cols());
  for (Index j = 0; j < dy; ++j) {
    const Matrix& M = kb.jac[static_cast<std::size_t>(j)];
    const Matrix& Q = kb.lap[static_cast<std::size_t>(j)];
    const Matrix MA = M * alpha.transpose();
    const Matrix QA = Q * alpha.transpose();
    const Vector s = MA.cwiseProduct(H).rowwise().sum();
    const Vector u = QA.cwiseProduct(H).rowwise().sum();
    value += 0.5 * s.squaredNorm() + u.sum();
    grad_h.noalias() += s.asDiagonal() * MA + QA;
    // R = diag(s) * M + Q accumulated into grad_alpha as H' * R
    grad_alpha.noalias() += H.transpose() * (s.asDiagonal() * M + Q);
  }

  ObjectiveResult out;
  out.value = value * inv_n + l2_alpha * alpha.squaredNorm();
  out.grad_alpha = grad_alpha * inv_n + 2.0 * l2_alpha * alpha;
  out.grad_theta = net.backward(cache, grad_h * inv_n);
  return out;
}

}  // namespace nkc
