#include "nkc/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace nkc {

Mlp Mlp::init(const std::vector<Index>& dims, OutAct act, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("mlp: need at least two layer dims");
  for (Index d : dims)
    if (d <= 0) throw std::invalid_argument("mlp: layer dims must be positive");
  Mlp net;
  net.out_act = act;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
    net.W.push_back(scale * rng.normal_matrix(dims[l + 1], dims[l]));
    net.b.push_back(Vector::Zero(dims[l + 1]));
  }
  return net;
}

Matrix Mlp::forward(const Matrix& X) const {
  Cache cache;
  return forward(X, cache);
}

Matrix Mlp::forward(const Matrix& X, Cache& cache) const {
  if (X.cols() != in_dim()) throw std::invalid_argument("mlp: input dimension mismatch");
  const std::size_t L = W.size();
  cache.z.resize(L);
  cache.a.resize(L + 1);
  cache.a[0] = X;
  for (std::size_t l = 0; l < L; ++l) {
    cache.z[l] = cache.a[l] * W[l].transpose();
    cache.z[l].rowwise() += b[l].transpose();
    if (l + 1 < L || out_act == OutAct::relu)
      cache.a[l + 1] = cache.z[l].cwiseMax(0.0);
    else
      cache.a[l + 1] = cache.z[l];
  }
  return cache.a[L];
}

MlpGrads Mlp::backward(const Cache& cache, const Matrix& grad_h) const {
  const std::size_t L = W.size();
  if (cache.z.size() != L || cache.a.size() != L + 1)
    throw std::invalid_argument("mlp: cache does not match network");
  if (grad_h.rows() != cache.a[0].rows() || grad_h.cols() != out_dim())
    throw std::invalid_argument("mlp: grad_h shape mismatch");
  MlpGrads g = zero_grads();
  Matrix delta = grad_h;
  for (std::size_t l = L; l-- > 0;) {
    if (l + 1 < L || out_act == OutAct::relu)
      delta = delta.cwiseProduct((cache.z[l].array() > 0.0).cast<double>().matrix());
    g.W[l].noalias() = delta.transpose() * cache.a[l];
    g.b[l] = delta.colwise().sum().transpose();
    if (l > 0) delta = delta * W[l];
  }
  return g;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (std::size_t l = 0; l < W.size(); ++l) {
    g.W.push_back(Matrix::Zero(W[l].rows(), W[l].cols()));
    g.b.push_back(Vector::Zero(b[l].size()));
  }
  return g;
}

Index Mlp::param_count() const {
  Index n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

std::vector<Index> Mlp::layer_dims() const {
  std::vector<Index> dims;
  if (W.empty()) return dims;
  dims.push_back(W.front().cols());
  for (const auto& w : W) dims.push_back(w.rows());
  return dims;
}

}  // namespace nkc
