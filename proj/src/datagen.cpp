#include "nkc/datagen.hpp"

#include <cmath>
#include <stdexcept>

#include "nkc/rng.hpp"

namespace nkc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

Matrix leaky(const Matrix& Z, double slope) {
  return Z.array().max(slope * Z.array());
}

}  // namespace

MixtureGenerator::MixtureGenerator(Index d_x, std::uint64_t seed)
    : dx_(d_x), seed_(seed) {
  if (d_x < 1) throw std::invalid_argument("MixtureGenerator: d_x must be >= 1");
  Rng rng(mix_seed(seed, 0x6d69, 0));
  const std::array<Index, 4> dims{d_x, d_x, d_x, 1};
  for (int k = 0; k < kComponents; ++k)
    for (int l = 0; l < 3; ++l) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(dims[static_cast<std::size_t>(l)]));
      nets_[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] =
          scale * rng.normal_matrix(dims[static_cast<std::size_t>(l) + 1],
                                    dims[static_cast<std::size_t>(l)]);
    }
}

Matrix MixtureGenerator::component_means(const Matrix& X) const {
  if (X.cols() != dx_) throw std::invalid_argument("component_means: bad x dim");
  Matrix out(X.rows(), kComponents);
  for (int k = 0; k < kComponents; ++k) {
    const auto& net = nets_[static_cast<std::size_t>(k)];
    Matrix A = leaky(X * net[0].transpose(), kLeakySlope);
    A = leaky(A * net[1].transpose(), kLeakySlope);
    out.col(k) = A * net[2].transpose();
  }
  return out;
}

Dataset MixtureGenerator::sample(Index T, std::uint64_t sample_seed,
                                 std::vector<int>* components) const {
  if (T < 1) throw std::invalid_argument("sample: T must be >= 1");
  Rng rng(mix_seed(sample_seed, 0x5a6d, 0));
  Dataset ds;
  ds.X = rng.normal_matrix(T, dx_);
  const Matrix mus = component_means(ds.X);
  ds.Y.resize(T, 1);
  if (components) components->assign(static_cast<std::size_t>(T), 0);
  for (Index t = 0; t < T; ++t) {
    const Index k = static_cast<Index>(rng.uniform_index(kComponents));
    ds.Y(t, 0) = mus(t, k) + kComponentStd * rng.normal();
    if (components) (*components)[static_cast<std::size_t>(t)] = static_cast<int>(k);
  }
  return ds;
}

double MixtureGenerator::true_cond_loglik(double y, const RowVector& x) const {
  Vector yv(1);
  yv(0) = y;
  Matrix X(1, dx_);
  X.row(0) = x;
  return true_cond_loglik(yv, X)(0);
}

Vector MixtureGenerator::true_cond_loglik(const Vector& y, const Matrix& X) const {
  if (y.size() != X.rows()) throw std::invalid_argument("true_cond_loglik: size mismatch");
  const Matrix mus = component_means(X);
  const double s = kComponentStd;
  const double log_norm = -std::log(3.0) - std::log(s) - 0.5 * kLogTwoPi;
  Matrix comp = (-0.5 * ((mus.colwise() - y) / s).array().square() + log_norm).matrix();
  Vector m = comp.rowwise().maxCoeff();
  Vector out(y.size());
  for (Index t = 0; t < y.size(); ++t)
    out(t) = m(t) + std::log((comp.row(t).array() - m(t)).exp().sum());
  return out;
}

Dataset sample_linear_gaussian(const Vector& a, double noise_std, Index T,
                               std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("sample_linear_gaussian: T must be >= 1");
  Rng rng(mix_seed(seed, 0x70b, 0));
  Dataset ds;
  ds.X = rng.normal_matrix(T, a.size());
  ds.Y.resize(T, 1);
  ds.Y.col(0) = ds.X * a + noise_std * rng.normal_vector(T);
  return ds;
}

Vector toy_direction(Index d_x, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xd12, 0));
  Vector a = rng.normal_vector(d_x);
  a *= std::sqrt(0.75) / a.norm();
  return a;
}

}  // namespace nkc
