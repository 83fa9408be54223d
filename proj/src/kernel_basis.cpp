#include "nkc/kernel_basis.hpp"

#include <stdexcept>

namespace nkc {

namespace {

void check_dims(const KernelBasis& basis, const Matrix& Y) {
  if (basis.center_count() < 1) throw std::invalid_argument("kernel basis: no centers");
  if (basis.sigma <= 0.0) throw std::invalid_argument("kernel basis: sigma must be positive");
  if (Y.cols() != basis.dy())
    throw std::invalid_argument("kernel basis: y dimension mismatch");
}

// K(t, b) = exp(-|y_t - c_b|^2 / (2 sigma^2))
Matrix kernel_matrix(const KernelBasis& basis, const Matrix& Y) {
  const Matrix& C = basis.centers;
  Matrix sq = (-2.0 * Y * C.transpose());
  sq.colwise() += Y.rowwise().squaredNorm();
  sq.rowwise() += C.rowwise().squaredNorm().transpose();
  return (sq.array().max(0.0) * (-0.5 / (basis.sigma * basis.sigma))).exp().matrix();
}

}  // namespace

Matrix kb_features(const KernelBasis& basis, const Matrix& Y) {
  return kb_bundle(basis, Y, true).feat;
}

std::vector<Matrix> kb_feature_jacobian(const KernelBasis& basis, const Matrix& Y) {
  return kb_bundle(basis, Y, false).jac;
}

std::vector<Matrix> kb_feature_laplacian(const KernelBasis& basis, const Matrix& Y) {
  return kb_bundle(basis, Y, false).lap;
}

KbBundle kb_bundle(const KernelBasis& basis, const Matrix& Y, bool want_features) {
  check_dims(basis, Y);
  const Index N = Y.rows();
  const Index B = basis.center_count();
  const Index dy = basis.dy();
  const double s2 = basis.sigma * basis.sigma;
  const double s4 = s2 * s2;
  const double s6 = s4 * s2;

  const Matrix K = kernel_matrix(basis, Y);
  std::vector<Matrix> D(static_cast<std::size_t>(dy));  // y_j - c_{b,j}, N x B
  for (Index j = 0; j < dy; ++j) {
    D[static_cast<std::size_t>(j)] =
        Y.col(j).replicate(1, B) - basis.centers.col(j).transpose().replicate(N, 1);
  }

  KbBundle out;
  if (want_features) {
    out.feat.resize(N, B * dy);
    for (Index j = 0; j < dy; ++j)
      out.feat.middleCols(j * B, B) =
          ((D[static_cast<std::size_t>(j)].array() / s2) * K.array()).matrix();
  }

  out.jac.assign(static_cast<std::size_t>(dy), Matrix(N, B * dy));
  out.lap.assign(static_cast<std::size_t>(dy), Matrix(N, B * dy));
  for (Index l = 0; l < dy; ++l) {
    const auto& Dl = D[static_cast<std::size_t>(l)].array();
    Matrix& J = out.jac[static_cast<std::size_t>(l)];
    Matrix& L = out.lap[static_cast<std::size_t>(l)];
    for (Index j = 0; j < dy; ++j) {
      const auto& Dj = D[static_cast<std::size_t>(j)].array();
      const double delta = (l == j) ? 1.0 : 0.0;
      J.middleCols(j * B, B) = ((delta / s2 - Dj * Dl / s4) * K.array()).matrix();
      L.middleCols(j * B, B) =
          ((-2.0 * delta * Dl / s4 - Dj / s4 + Dj * Dl.square() / s6) * K.array())
              .matrix();
    }
  }
  return out;
}

Vector features(const KernelBasis& basis, const Vector& y) {
  return kb_features(basis, y.transpose()).row(0).transpose();
}

Matrix feature_jacobian(const KernelBasis& basis, const Vector& y) {
  auto rows = kb_feature_jacobian(basis, y.transpose());
  Matrix out(basis.dy(), basis.feature_dim());
  for (Index l = 0; l < basis.dy(); ++l)
    out.row(l) = rows[static_cast<std::size_t>(l)].row(0);
  return out;
}

Matrix feature_laplacian_rows(const KernelBasis& basis, const Vector& y) {
  auto rows = kb_feature_laplacian(basis, y.transpose());
  Matrix out(basis.dy(), basis.feature_dim());
  for (Index l = 0; l < basis.dy(); ++l)
    out.row(l) = rows[static_cast<std::size_t>(l)].row(0);
  return out;
}

}  // namespace nkc
