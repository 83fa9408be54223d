#include "nkc/estimator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "nkc/errors.hpp"
#include "nkc/rng.hpp"

namespace nkc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

void check_model_dims(const NkcModel& model, Index dy, Index dx) {
  if (dy != model.basis.dy()) throw std::invalid_argument("y dimension mismatch");
  if (dx != model.net.in_dim()) throw std::invalid_argument("x dimension mismatch");
  if (model.alpha.rows() != model.net.out_dim() ||
      model.alpha.cols() != model.basis.feature_dim())
    throw std::invalid_argument("alpha shape mismatch");
}

// logZ and jackknife SE from log importance weights.
LogPartition partition_from_logw(const Vector& w) {
  const Index M = w.size();
  const double m = w.maxCoeff();
  if (!std::isfinite(m)) throw NumericalError("importance weights are not finite");
  const Vector e = (w.array() - m).exp();
  const double S = e.sum();
  if (!(S > 0.0)) throw NumericalError("all importance weights vanished");

  LogPartition out;
  out.value = m + std::log(S / static_cast<double>(M));
  if (M < 2) {
    out.se = std::numeric_limits<double>::infinity();
    return out;
  }
  // Leave-one-out estimates share max m; guard the dominant-weight case.
  Vector loo(M);
  const double tiny = std::numeric_limits<double>::min();
  for (Index i = 0; i < M; ++i)
    loo(i) = m + std::log(std::max(S - e(i), tiny) / static_cast<double>(M - 1));
  const double mean_loo = loo.mean();
  const double ss = (loo.array() - mean_loo).square().sum();
  out.se = std::sqrt(ss * static_cast<double>(M - 1) / static_cast<double>(M));
  return out;
}

Matrix draw_proposal(const Proposal& p, Rng& rng) {
  const Index dy = p.mean.size();
  Matrix Yp = rng.normal_matrix(p.M, dy);
  Yp = (Yp.array().rowwise() * p.var.transpose().array().sqrt()).matrix();
  Yp.rowwise() += p.mean.transpose();
  return Yp;
}

Vector proposal_logpdf(const Proposal& p, const Matrix& Yp) {
  const Matrix centered = Yp.rowwise() - p.mean.transpose();
  const double logdet =
      p.var.array().log().sum() + static_cast<double>(p.var.size()) * kLogTwoPi;
  return (-0.5 * (centered.array().square().rowwise() / p.var.transpose().array())
                     .rowwise()
                     .sum() -
          0.5 * logdet)
      .matrix();
}

void check_proposal(const Proposal& p) {
  if (p.M < 100) throw ConfigError("proposal sample count must be >= 100");
  if (p.mean.size() != p.var.size() || p.mean.size() == 0)
    throw ConfigError("proposal mean/var shape mismatch");
  if (!(p.var.array() > 0.0).all()) throw ConfigError("proposal variances must be positive");
}

}  // namespace

Vector log_unnormalized_batch(const NkcModel& model, const Matrix& Y, const Matrix& X) {
  if (Y.rows() != X.rows()) throw std::invalid_argument("row count mismatch");
  check_model_dims(model, Y.cols(), X.cols());
  const Matrix F = kb_features(model.basis, Y);
  const Matrix H = model.net.forward(X);
  return (F * model.alpha.transpose()).cwiseProduct(H).rowwise().sum();
}

double log_unnormalized(const NkcModel& model, const Vector& y, const Vector& x) {
  return log_unnormalized_batch(model, y.transpose(), x.transpose())(0);
}

Matrix score_y_batch(const NkcModel& model, const Matrix& Y, const Matrix& X) {
  if (Y.rows() != X.rows()) throw std::invalid_argument("row count mismatch");
  check_model_dims(model, Y.cols(), X.cols());
  const auto jac = kb_feature_jacobian(model.basis, Y);
  const Matrix H = model.net.forward(X);
  Matrix out(Y.rows(), Y.cols());
  for (Index l = 0; l < Y.cols(); ++l)
    out.col(l) = (jac[static_cast<std::size_t>(l)] * model.alpha.transpose())
                     .cwiseProduct(H)
                     .rowwise()
                     .sum();
  return out;
}

Vector score_y(const NkcModel& model, const Vector& y, const Vector& x) {
  return score_y_batch(model, y.transpose(), x.transpose()).row(0).transpose();
}

Proposal make_proposal(const Matrix& train_y, Index M) {
  if (train_y.rows() < 2) throw std::invalid_argument("make_proposal: need >= 2 samples");
  Proposal p;
  p.M = M;
  p.mean = train_y.colwise().mean().transpose();
  p.var.resize(train_y.cols());
  for (Index j = 0; j < train_y.cols(); ++j)
    p.var(j) = 2.0 * (train_y.col(j).array() - p.mean(j)).square().mean();
  check_proposal(p);
  return p;
}

LogPartition log_partition(const std::function<double(const Vector&)>& unnorm,
                           const Proposal& proposal, std::uint64_t seed) {
  check_proposal(proposal);
  Rng rng(seed);
  const Matrix Yp = draw_proposal(proposal, rng);
  const Vector logpi = proposal_logpdf(proposal, Yp);
  Vector w(proposal.M);
  for (Index i = 0; i < proposal.M; ++i) {
    const double u = unnorm(Yp.row(i).transpose());
    if (std::isnan(u)) throw NumericalError("unnormalized log-density returned NaN");
    w(i) = u - logpi(i);
  }
  return partition_from_logw(w);
}

std::uint64_t eval_sample_seed(std::uint64_t seed, Index sample_index) {
  return mix_seed(seed, 0x15a3, static_cast<std::uint64_t>(sample_index));
}

EvalReport cond_log_likelihood(const NkcModel& model, const Dataset& test,
                               const Proposal& proposal, std::uint64_t seed,
                               bool original_scale) {
  if (test.rows() == 0) throw DataError("empty test set");
  check_model_dims(model, test.dy(), test.dx());
  check_proposal(proposal);

  const Index N = test.rows();
  const Matrix H = model.net.forward(test.X);
  const Matrix Ft = kb_features(model.basis, test.Y);
  const Vector num = (Ft * model.alpha.transpose()).cwiseProduct(H).rowwise().sum();

  EvalReport rep;
  rep.per_sample.resize(N);
  for (Index t = 0; t < N; ++t) {
    Rng rng(eval_sample_seed(seed, t));
    const Matrix Yp = draw_proposal(proposal, rng);
    const Vector logpi = proposal_logpdf(proposal, Yp);
    const Vector un =
        (kb_features(model.basis, Yp) * model.alpha.transpose()) * H.row(t).transpose();
    if (!un.allFinite()) throw NumericalError("unnormalized log-density overflow");
    const LogPartition z = partition_from_logw(un - logpi);
    rep.per_sample(t) = num(t) - z.value;
  }
  rep.original_scale = original_scale;
  rep.log_scale_correction = model.standardization.log_scale_y_sum();
  if (original_scale) rep.per_sample.array() -= rep.log_scale_correction;
  rep.mean_loglik = rep.per_sample.mean();
  rep.se = N > 1 ? std::sqrt((rep.per_sample.array() - rep.mean_loglik).square().sum() /
                             static_cast<double>(N - 1) / static_cast<double>(N))
                 : 0.0;
  rep.proposal_samples = proposal.M;
  rep.seed = seed;
  return rep;
}

Vector density_grid(const NkcModel& model, const Vector& x, const Vector& y_grid) {
  if (model.basis.dy() != 1) throw std::invalid_argument("density_grid: d_y must be 1");
  if (y_grid.size() < 3) throw std::invalid_argument("density_grid: need >= 3 grid points");
  for (Index i = 1; i < y_grid.size(); ++i)
    if (!(y_grid(i) > y_grid(i - 1)))
      throw std::invalid_argument("density_grid: grid must be strictly increasing");

  const Index n = y_grid.size();
  const Matrix X = x.transpose().replicate(n, 1);
  Vector g = log_unnormalized_batch(model, y_grid, X);
  g.array() -= g.maxCoeff();
  const Vector v = g.array().exp().matrix();
  double z = 0.0;
  for (Index i = 1; i < n; ++i)
    z += 0.5 * (v(i) + v(i - 1)) * (y_grid(i) - y_grid(i - 1));
  if (!(z > 0.0)) throw NumericalError("density_grid: zero normalizer");
  return v / z;
}

}  // namespace nkc
