#include "nkc/lscde.hpp"

#include <cmath>
#include <limits>

#include "nkc/errors.hpp"
#include "nkc/rng.hpp"
#include "nkc/trainer.hpp"

namespace nkc {

namespace {

constexpr double kPi = 3.141592653589793;
constexpr double kDensityFloor = 1e-12;
// Vectorized exp clamps very negative arguments to ~exp(-709.78) instead of
// underflowing, so a partition at an x far from every center comes back as
// ~1e-308 rather than 0. Anything below this floor is treated as vanished.
constexpr double kPartitionFloor = 1e-290;

// Squared distances between row sets, clamped at zero.
Matrix sqdist(const Matrix& A, const Matrix& B) {
  Matrix out = -2.0 * A * B.transpose();
  out.colwise() += A.rowwise().squaredNorm();
  out.rowwise() += B.rowwise().squaredNorm().transpose();
  return out.cwiseMax(0.0);
}

// Gaussian y-convolution factor: integral over y of k(y,y_b) k(y,y_b').
Matrix conv_matrix(const Matrix& Yc, double sigma) {
  const double dy = static_cast<double>(Yc.cols());
  const double scale = std::pow(std::sqrt(kPi) * sigma, dy);
  return (scale *
          (sqdist(Yc, Yc).array() * (-0.25 / (sigma * sigma))).exp())
      .matrix();
}

struct FoldSystem {
  std::vector<Matrix> G;      // per-fold E_f' E_f (without C factor)
  std::vector<Vector> hsum;   // per-fold column sums of P_f
  std::vector<Index> counts;  // fold sizes
  Matrix C;                   // convolution factor
};

FoldSystem build_folds(const Matrix& E, const Matrix& P,
                       const std::vector<Index>& fold_id, Index folds,
                       const Matrix& C) {
  const Index B = E.cols();
  FoldSystem fs;
  fs.C = C;
  fs.G.assign(static_cast<std::size_t>(folds), Matrix::Zero(B, B));
  fs.hsum.assign(static_cast<std::size_t>(folds), Vector::Zero(B));
  fs.counts.assign(static_cast<std::size_t>(folds), 0);
  std::vector<std::vector<Index>> rows(static_cast<std::size_t>(folds));
  for (Index t = 0; t < E.rows(); ++t)
    rows[static_cast<std::size_t>(fold_id[static_cast<std::size_t>(t)])].push_back(t);
  for (Index f = 0; f < folds; ++f) {
    const auto& r = rows[static_cast<std::size_t>(f)];
    Matrix Ef(static_cast<Index>(r.size()), B);
    Vector hs = Vector::Zero(B);
    for (std::size_t i = 0; i < r.size(); ++i) {
      Ef.row(static_cast<Index>(i)) = E.row(r[i]);
      hs += P.row(r[i]).transpose();
    }
    fs.G[static_cast<std::size_t>(f)].noalias() = Ef.transpose() * Ef;
    fs.hsum[static_cast<std::size_t>(f)] = hs;
    fs.counts[static_cast<std::size_t>(f)] = static_cast<Index>(r.size());
  }
  return fs;
}

bool solve_clipped(const Matrix& H, const Vector& h, double lambda, Vector& beta) {
  Matrix A = H;
  A.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) return false;
  beta = ldlt.solve(h);
  if (!beta.allFinite()) return false;
  beta = beta.cwiseMax(0.0);
  return true;
}

}  // namespace

LscdeSystem lscde_system(const Dataset& data, const Matrix& Yc, const Matrix& Xc,
                         double sigma) {
  if (data.rows() == 0) throw DataError("lscde: empty dataset");
  const double inv_2s2 = 0.5 / (sigma * sigma);
  const Matrix dx2 = sqdist(data.X, Xc);
  const Matrix dy2 = sqdist(data.Y, Yc);
  const Matrix E = (dx2.array() * -inv_2s2).exp().matrix();
  const Matrix P = ((dx2 + dy2).array() * -inv_2s2).exp().matrix();
  LscdeSystem sys;
  const double T = static_cast<double>(data.rows());
  sys.H = ((E.transpose() * E) / T).cwiseProduct(conv_matrix(Yc, sigma));
  sys.h = P.colwise().sum().transpose() / T;
  return sys;
}

double lscde_ls_criterion(const LscdeModel& model, const Dataset& data) {
  const LscdeSystem sys = lscde_system(data, model.Yc, model.Xc, model.sigma);
  return 0.5 * model.beta.dot(sys.H * model.beta) - sys.h.dot(model.beta);
}

std::vector<double> lscde_default_sigma_grid(const Dataset& data, std::uint64_t seed) {
  Matrix Z(data.rows(), data.dy() + data.dx());
  Z << data.Y, data.X;
  const double med = median_heuristic(Z, seed);
  return {0.3 * med, 0.5 * med, med, 2.0 * med, 3.0 * med};
}

LscdeModel lscde_fit(const Dataset& train, Index center_count,
                     const std::vector<double>& sigma_grid,
                     const std::vector<double>& lambda_grid, Index folds,
                     std::uint64_t seed) {
  const Index T = train.rows();
  if (T < folds || T < 2) throw DataError("lscde: dataset too small");
  if (folds < 2) throw ConfigError("lscde: need at least 2 folds");
  if (sigma_grid.empty() || lambda_grid.empty())
    throw ConfigError("lscde: empty hyperparameter grid");
  for (double s : sigma_grid)
    if (!(s > 0.0)) throw ConfigError("lscde: sigma must be positive");

  Rng rng(mix_seed(seed, 0x15cd, 0));
  const auto cpick = rng.choice(T, std::min(center_count, T));
  const Index B = static_cast<Index>(cpick.size());
  Matrix Yc(B, train.dy()), Xc(B, train.dx());
  for (Index i = 0; i < B; ++i) {
    Yc.row(i) = train.Y.row(cpick[static_cast<std::size_t>(i)]);
    Xc.row(i) = train.X.row(cpick[static_cast<std::size_t>(i)]);
  }
  const auto fold_perm = rng.permutation(T);
  std::vector<Index> fold_id(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t)
    fold_id[static_cast<std::size_t>(t)] = fold_perm[static_cast<std::size_t>(t)] % folds;

  double best_cv = std::numeric_limits<double>::infinity();
  double best_sigma = 0.0, best_lambda = 0.0;
  bool any_ok = false;

  for (double sigma : sigma_grid) {
    const double inv_2s2 = 0.5 / (sigma * sigma);
    const Matrix dx2 = sqdist(train.X, Xc);
    const Matrix dy2 = sqdist(train.Y, Yc);
    const Matrix E = (dx2.array() * -inv_2s2).exp().matrix();
    const Matrix P = ((dx2 + dy2).array() * -inv_2s2).exp().matrix();
    const Matrix C = conv_matrix(Yc, sigma);
    const FoldSystem fs = build_folds(E, P, fold_id, folds, C);

    Matrix G_total = Matrix::Zero(B, B);
    Vector h_total = Vector::Zero(B);
    for (Index f = 0; f < folds; ++f) {
      G_total += fs.G[static_cast<std::size_t>(f)];
      h_total += fs.hsum[static_cast<std::size_t>(f)];
    }

    for (double lambda : lambda_grid) {
      if (!(lambda > 0.0)) throw ConfigError("lscde: lambda must be positive");
      double cv = 0.0;
      bool ok = true;
      for (Index f = 0; f < folds && ok; ++f) {
        const double n_tr =
            static_cast<double>(T - fs.counts[static_cast<std::size_t>(f)]);
        const double n_te = static_cast<double>(fs.counts[static_cast<std::size_t>(f)]);
        if (n_tr < 1.0 || n_te < 1.0) {
          ok = false;
          break;
        }
        const Matrix H_tr =
            ((G_total - fs.G[static_cast<std::size_t>(f)]) / n_tr).cwiseProduct(C);
        const Vector h_tr = (h_total - fs.hsum[static_cast<std::size_t>(f)]) / n_tr;
        Vector beta;
        if (!solve_clipped(H_tr, h_tr, lambda, beta)) {
          ok = false;
          break;
        }
        const Matrix H_te =
            (fs.G[static_cast<std::size_t>(f)] / n_te).cwiseProduct(C);
        const Vector h_te = fs.hsum[static_cast<std::size_t>(f)] / n_te;
        cv += 0.5 * beta.dot(H_te * beta) - h_te.dot(beta);
      }
      if (ok && cv < best_cv) {
        best_cv = cv;
        best_sigma = sigma;
        best_lambda = lambda;
        any_ok = true;
      }
    }
  }
  if (!any_ok) throw NumericalError("lscde: every hyperparameter candidate failed");

  LscdeModel model;
  model.Yc = Yc;
  model.Xc = Xc;
  model.sigma = best_sigma;
  model.lambda = best_lambda;
  const LscdeSystem sys = lscde_system(train, Yc, Xc, best_sigma);
  if (!solve_clipped(sys.H, sys.h, best_lambda, model.beta))
    throw NumericalError("lscde: final solve failed");
  return model;
}

double lscde_partition(const LscdeModel& model, const Vector& x) {
  const double dy = static_cast<double>(model.Yc.cols());
  const double scale = std::pow(std::sqrt(2.0 * kPi) * model.sigma, dy);
  const Vector ex =
      ((model.Xc.rowwise() - x.transpose()).rowwise().squaredNorm().array() *
       (-0.5 / (model.sigma * model.sigma)))
          .exp()
          .matrix();
  return scale * model.beta.dot(ex);
}

double lscde_density(const LscdeModel& model, const Vector& y, const Vector& x) {
  const double Z = lscde_partition(model, x);
  if (!(Z > kPartitionFloor))
    throw NumericalError("lscde: zero partition at query point");
  const Vector k =
      (((model.Yc.rowwise() - y.transpose()).rowwise().squaredNorm() +
        (model.Xc.rowwise() - x.transpose()).rowwise().squaredNorm())
           .array() *
       (-0.5 / (model.sigma * model.sigma)))
          .exp()
          .matrix();
  return std::max(model.beta.dot(k), 0.0) / Z;
}

LscdeEval lscde_cond_log_likelihood(const LscdeModel& model, const Dataset& test) {
  if (test.rows() == 0) throw DataError("lscde: empty test set");
  if (test.dy() != model.Yc.cols() || test.dx() != model.Xc.cols())
    throw DataError("lscde: test dimensions do not match the model");
  const double inv_2s2 = 0.5 / (model.sigma * model.sigma);
  const Matrix dx2 = sqdist(test.X, model.Xc);
  const Matrix dy2 = sqdist(test.Y, model.Yc);
  const Vector num =
      ((dx2 + dy2).array() * -inv_2s2).exp().matrix() * model.beta;
  const double dy = static_cast<double>(test.dy());
  const double scale = std::pow(std::sqrt(2.0 * kPi) * model.sigma, dy);
  const Vector Z = scale * ((dx2.array() * -inv_2s2).exp().matrix() * model.beta);

  LscdeEval out;
  out.per_sample.resize(test.rows());
  double sum = 0.0, sumsq = 0.0;
  Index kept = 0;
  for (Index t = 0; t < test.rows(); ++t) {
    if (!(Z(t) > kPartitionFloor)) {
      out.flagged_rows.push_back(t);
      out.per_sample(t) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double v = std::log(std::max(num(t), kDensityFloor)) - std::log(Z(t));
    out.per_sample(t) = v;
    sum += v;
    sumsq += v * v;
    ++kept;
  }
  out.flagged = static_cast<Index>(out.flagged_rows.size());
  if (kept == 0) throw NumericalError("lscde: every test sample was flagged");
  out.mean_loglik = sum / static_cast<double>(kept);
  if (kept > 1) {
    const double var =
        (sumsq - sum * sum / static_cast<double>(kept)) / static_cast<double>(kept - 1);
    out.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(kept));
  }
  return out;
}

}  // namespace nkc
