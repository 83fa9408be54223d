#include "nkc/repr_checks.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nkc/errors.hpp"
#include "nkc/estimator.hpp"
#include "nkc/rng.hpp"

namespace nkc {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(std::min(z, 30.0))); }
double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Matrix random_invertible(Index d, Rng& rng) {
  const Eigen::HouseholderQR<Matrix> q1(rng.normal_matrix(d, d));
  const Eigen::HouseholderQR<Matrix> q2(rng.normal_matrix(d, d));
  Vector sv(d);
  for (Index i = 0; i < d; ++i) sv(i) = rng.uniform(0.5, 2.0);
  const Matrix Q1 = q1.householderQ();
  const Matrix Q2 = q2.householderQ();
  return Q1 * sv.asDiagonal() * Q2;
}

Matrix leaky(const Matrix& Z) { return Z.array().max(0.2 * Z.array()); }

// Least-squares fit of targets on [features, 1]; returns (coef, per-col R^2)
// evaluated on the same rows.
struct AffineFit {
  Matrix coef;  // (p+1) x q, last row is the intercept
  Vector r2;
};
AffineFit affine_lstsq(const Matrix& features, const Matrix& targets) {
  const Index n = features.rows();
  Matrix Z(n, features.cols() + 1);
  Z << features, Matrix::Ones(n, 1);
  AffineFit fit;
  fit.coef = Z.colPivHouseholderQr().solve(targets);
  const Matrix resid = targets - Z * fit.coef;
  fit.r2.resize(targets.cols());
  for (Index j = 0; j < targets.cols(); ++j) {
    const double mean = targets.col(j).mean();
    const double sst = (targets.col(j).array() - mean).square().sum();
    fit.r2(j) = 1.0 - resid.col(j).squaredNorm() / sst;
  }
  return fit;
}

double greedy_mean_abs_corr(const Matrix& A, const Matrix& B) {
  const Index d = A.cols();
  Matrix corr(d, B.cols());
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < B.cols(); ++j) {
      const Vector ai = (A.col(i).array() - A.col(i).mean()).matrix();
      const Vector bj = (B.col(j).array() - B.col(j).mean()).matrix();
      const double den = ai.norm() * bj.norm();
      corr(i, j) = den > 0.0 ? std::abs(ai.dot(bj)) / den : 0.0;
    }
  std::vector<bool> used(static_cast<std::size_t>(B.cols()), false);
  double total = 0.0;
  for (Index step = 0; step < d; ++step) {
    double best = -1.0;
    Index bi = -1, bj = -1;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < B.cols(); ++j)
        if (!used[static_cast<std::size_t>(j)] && corr(i, j) > best) {
          best = corr(i, j);
          bi = i;
          bj = j;
        }
    total += best;
    used[static_cast<std::size_t>(bj)] = true;
    corr.row(bi).setConstant(-2.0);
  }
  return total / static_cast<double>(d);
}

double ridge_test_mse(const Matrix& Ftr, const Vector& ytr, const Matrix& Fte,
                      const Vector& yte) {
  const Index p = Ftr.cols();
  Matrix Ztr(Ftr.rows(), p + 1);
  Ztr << Ftr, Matrix::Ones(Ftr.rows(), 1);
  Matrix A = Ztr.transpose() * Ztr;
  A.diagonal().array() += 1e-8 * static_cast<double>(Ftr.rows());
  const Vector coef = A.ldlt().solve(Ztr.transpose() * ytr);
  Matrix Zte(Fte.rows(), p + 1);
  Zte << Fte, Matrix::Ones(Fte.rows(), 1);
  return (Zte * coef - yte).squaredNorm() / static_cast<double>(Fte.rows());
}

}  // namespace

IcaGenerator IcaGenerator::make(Index d, std::uint64_t seed, bool identity_mixing,
                                bool constant_lambda) {
  if (d < 1) throw std::invalid_argument("IcaGenerator: d must be >= 1");
  IcaGenerator g;
  g.d = d;
  g.seed = seed;
  g.identity_mixing = identity_mixing;
  g.constant_lambda = constant_lambda;
  Rng rng(mix_seed(seed, 0x1ca, 0));
  g.a.resize(d);
  g.b.resize(d);
  g.c.resize(d);
  g.om.resize(d);
  g.ph.resize(d);
  for (Index i = 0; i < d; ++i) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    g.a(i) = rng.uniform(0.4, 0.9) * sign;
    g.b(i) = rng.uniform(0.5, 1.5);
    g.c(i) = rng.uniform(0.5, 1.0);
    g.om(i) = rng.uniform(1.0, 2.0);
    g.ph(i) = rng.uniform(0.0, 2.0 * 3.141592653589793);
  }
  if (constant_lambda) {
    g.a.setZero();
    g.c.setZero();
  }
  g.L1 = random_invertible(d, rng);
  g.L2 = random_invertible(d, rng);
  return g;
}

Matrix IcaGenerator::lambda(const Vector& y) const {
  Matrix out(y.size(), d);
  for (Index t = 0; t < y.size(); ++t)
    for (Index i = 0; i < d; ++i) {
      const double z = a(i) * y(t) + b(i) + c(i) * std::sin(om(i) * y(t) + ph(i));
      out(t, i) = softplus(z) + 0.1;
    }
  return out;
}

Matrix IcaGenerator::lambda_dy(const Vector& y) const {
  Matrix out(y.size(), d);
  for (Index t = 0; t < y.size(); ++t)
    for (Index i = 0; i < d; ++i) {
      const double z = a(i) * y(t) + b(i) + c(i) * std::sin(om(i) * y(t) + ph(i));
      const double dz = a(i) + c(i) * om(i) * std::cos(om(i) * y(t) + ph(i));
      out(t, i) = sigmoid(z) * dz;
    }
  return out;
}

IcaGenerator::Triple IcaGenerator::sample(Index T, std::uint64_t sample_seed) const {
  Rng rng(mix_seed(sample_seed, 0x1ca5, 0));
  IcaGenerator::Triple tr;
  tr.y = rng.normal_matrix(T, 1);
  const Matrix lam = lambda(tr.y.col(0));
  tr.s = (rng.normal_matrix(T, d).array() / lam.array().sqrt()).matrix();
  if (identity_mixing)
    tr.x = tr.s;
  else
    tr.x = leaky(tr.s * L1.transpose()) * L2.transpose();
  return tr;
}

double i5_min_eigenvalue(const IcaGenerator& gen, Index n_points,
                         std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x155, 0));
  const Vector y = rng.normal_vector(n_points);
  const Matrix dl = gen.lambda_dy(y);
  const Matrix G = dl.transpose() * dl;
  Eigen::SelfAdjointEigenSolver<Matrix> es(G);
  return es.eigenvalues().minCoeff();
}

AffineRecoveryReport ica_experiment(const IcaGenerator& gen, Index T,
                                    const TrainConfig& cfg) {
  if (cfg.d != gen.d)
    throw ConfigError("ica_experiment: train_config.d must equal the source dim");
  if (T < 100) throw DataError("ica_experiment: T too small");

  const auto tri = gen.sample(T, mix_seed(gen.seed, 0xda7a, 0));
  const Index nte = T / 10;
  const Index ntr = T - nte;

  Dataset train{tri.y.topRows(ntr), tri.x.topRows(ntr)};
  Dataset test{tri.y.bottomRows(nte), tri.x.bottomRows(nte)};
  const Standardizer std_rec = Standardizer::fit(train);
  const Dataset train_s = std_rec.transform(train);
  const Dataset test_s = std_rec.transform(test);

  auto [model, report] = fit(train_s, cfg);

  const Matrix H = model.net.forward(test_s.X);
  const Matrix q = (-0.5 * tri.s.bottomRows(nte).array().square()).matrix();
  const AffineFit af = affine_lstsq(H, q);

  AffineRecoveryReport out;
  out.B = af.coef.topRows(af.coef.rows() - 1).transpose();
  out.b = af.coef.row(af.coef.rows() - 1).transpose();
  out.r2 = af.r2;
  out.mean_r2 = af.r2.mean();
  const Eigen::JacobiSVD<Matrix> svd(out.B);
  const double smin = svd.singularValues().minCoeff();
  out.cond_B = smin > 0.0 ? svd.singularValues().maxCoeff() / smin
                          : std::numeric_limits<double>::infinity();
  out.mean_abs_corr = greedy_mean_abs_corr(q, H);
  out.i5_min_eig = i5_min_eigenvalue(gen, 10 * gen.d, mix_seed(gen.seed, 0x15b, 0));
  out.chosen_width = report.chosen_width;
  out.chosen_lr = report.chosen_lr;
  return out;
}

Dataset sdr_dataset(Index d_true, Index d_x, Index T, std::uint64_t seed) {
  if (d_true < 0 || d_true >= d_x)
    throw ConfigError("sdr_dataset: need 0 <= d_true < d_x");
  Rng rng(mix_seed(seed, 0x5d6, 0));
  Dataset ds;
  ds.X = rng.normal_matrix(T, d_x);
  ds.Y.resize(T, 1);
  for (Index t = 0; t < T; ++t) {
    double lam = 1.0;
    if (d_true > 0) {
      double z = 0.0;
      for (Index i = 0; i < d_true; ++i) z += std::tanh(2.0 * ds.X(t, i));
      z /= static_cast<double>(d_true);
      lam = softplus(2.5 * z) + 0.5;
    }
    ds.Y(t, 0) = rng.normal() / std::sqrt(lam);
  }
  return ds;
}

SdrReport sdr_experiment(Index d_true, Index d_x, Index T,
                         const TrainConfig& base_cfg, std::uint64_t seed,
                         Index is_samples) {
  const Dataset full = sdr_dataset(d_true, d_x, T, seed);
  const Index nte = std::min<Index>(1000, T / 5);
  if (nte < 10) throw DataError("sdr_experiment: T too small");
  const Index ntr = T - nte;

  Dataset train{full.Y.topRows(ntr), full.X.topRows(ntr)};
  Dataset test{full.Y.bottomRows(nte), full.X.bottomRows(nte)};
  const Standardizer std_rec = Standardizer::fit(train);
  const Dataset train_s = std_rec.transform(train);
  const Dataset test_s = std_rec.transform(test);
  const Proposal prop = make_proposal(train_s.Y, is_samples);

  SdrReport out;
  out.d_low = std::max<Index>(d_true, 1);
  out.d_high = out.d_low + 2;
  const double log_ys = std_rec.log_scale_y_sum();

  NkcModel model_low;
  for (Index dd : {out.d_low, out.d_high}) {
    TrainConfig cfg = base_cfg;
    cfg.d = dd;
    auto [model, report] = fit(train_s, cfg);
    const EvalReport ev =
        cond_log_likelihood(model, test_s, prop, mix_seed(seed, 0xe7a1, 0), false);
    const double ll = ev.mean_loglik - log_ys;
    if (dd == out.d_low) {
      out.loglik_low = ll;
      model_low = std::move(model);
    } else {
      out.loglik_high = ll;
    }
  }
  out.gap = out.loglik_high - out.loglik_low;

  const Matrix Htr = model_low.net.forward(train_s.X);
  const Matrix Hte = model_low.net.forward(test_s.X);
  out.pred_mse_h = ridge_test_mse(Htr, train_s.Y.col(0), Hte, test_s.Y.col(0));
  out.pred_mse_x = ridge_test_mse(train_s.X, train_s.Y.col(0), test_s.X, test_s.Y.col(0));
  const double train_mean = train_s.Y.col(0).mean();
  out.pred_mse_baseline =
      (test_s.Y.col(0).array() - train_mean).square().mean();
  return out;
}

}  // namespace nkc
