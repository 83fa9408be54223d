#include "nkc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nkc/errors.hpp"
#include "nkc/objective.hpp"
#include "nkc/rng.hpp"

namespace nkc {

void validate(const TrainConfig& cfg) {
  if (cfg.d < 1) throw ConfigError("d must be >= 1");
  if (cfg.B < 1) throw ConfigError("B must be >= 1");
  if (cfg.minibatch < 1) throw ConfigError("minibatch must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
    throw ConfigError("val_fraction must be in (0, 1)");
  if (cfg.lr_grid.empty() || cfg.width_grid.empty())
    throw ConfigError("lr_grid and width_grid must be nonempty");
  for (double lr : cfg.lr_grid)
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  for (double w : cfg.width_grid)
    if (!(w > 0.0)) throw ConfigError("kernel widths must be positive");
  if (!(cfg.l2_alpha >= 0.0)) throw ConfigError("l2_alpha must be >= 0");
  if (!(cfg.rmsprop_decay > 0.0 && cfg.rmsprop_decay < 1.0))
    throw ConfigError("rmsprop_decay must be in (0, 1)");
  if (!(cfg.rmsprop_epsilon > 0.0)) throw ConfigError("rmsprop_epsilon must be positive");
  if (cfg.hidden.empty()) throw ConfigError("hidden layer list must be nonempty");
}

double median_heuristic(const Matrix& Y, std::uint64_t seed, Index cap) {
  if (Y.rows() < 2) throw std::invalid_argument("median_heuristic: need >= 2 samples");
  Matrix S;
  if (Y.rows() > cap) {
    Rng rng(seed);
    S = Matrix(cap, Y.cols());
    const auto pick = rng.choice(Y.rows(), cap);
    for (Index i = 0; i < cap; ++i) S.row(i) = Y.row(pick[static_cast<std::size_t>(i)]);
  } else {
    S = Y;
  }
  const Index n = S.rows();
  const Vector sq = S.rowwise().squaredNorm();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d2 = sq(i) + sq(j) - 2.0 * S.row(i).dot(S.row(j));
      dist.push_back(std::sqrt(std::max(d2, 0.0)));
    }
  const std::size_t m = dist.size();
  std::sort(dist.begin(), dist.end());
  if (m % 2 == 1) return dist[m / 2];
  return 0.5 * (dist[m / 2 - 1] + dist[m / 2]);
}

void rmsprop_step(Matrix& params, const Matrix& grads, Matrix& state, double lr,
                  double decay, double epsilon) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
      params.rows() != state.rows() || params.cols() != state.cols())
    throw std::invalid_argument("rmsprop_step: shape mismatch");
  state.array() = decay * state.array() + (1.0 - decay) * grads.array().square();
  params.array() -= lr * grads.array() / (state.array() + epsilon).sqrt();
}

void rmsprop_step(Vector& params, const Vector& grads, Vector& state, double lr,
                  double decay, double epsilon) {
  if (params.size() != grads.size() || params.size() != state.size())
    throw std::invalid_argument("rmsprop_step: shape mismatch");
  state.array() = decay * state.array() + (1.0 - decay) * grads.array().square();
  params.array() -= lr * grads.array() / (state.array() + epsilon).sqrt();
}

namespace {

struct Snapshot {
  double val_j = std::numeric_limits<double>::infinity();
  Matrix alpha;
  Mlp net;
  double sigma = 0.0;
  double lr = 0.0;
  double width = 0.0;
  Index epoch = -1;
  Index candidate = -1;
};

}  // namespace

std::pair<NkcModel, TrainReport> fit(const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  const auto t_start = std::chrono::steady_clock::now();
  const Index T = data.rows();
  if (T < cfg.B || T < cfg.minibatch || T < 5)
    throw DataError("dataset too small for the requested configuration");

  // Deterministic sub-streams of the config seed.
  Rng split_rng(mix_seed(cfg.seed, 0x5e91, 0));
  const auto perm = split_rng.permutation(T);
  const Index ntr = static_cast<Index>(
      std::llround(static_cast<double>(T) * (1.0 - cfg.val_fraction)));
  if (ntr < cfg.minibatch || ntr < cfg.B || T - ntr < 1)
    throw DataError("dataset too small for the requested split");
  std::vector<Index> tr(perm.begin(), perm.begin() + ntr);
  std::vector<Index> va(perm.begin() + ntr, perm.end());
  const Dataset dtr = take_rows(data, tr);
  const Dataset dva = take_rows(data, va);

  Rng center_rng(mix_seed(cfg.seed, 0xce7e, 0));
  const auto cidx = center_rng.choice(ntr, std::min(cfg.B, ntr));
  Matrix centers(static_cast<Index>(cidx.size()), data.dy());
  for (std::size_t i = 0; i < cidx.size(); ++i)
    centers.row(static_cast<Index>(i)) = dtr.Y.row(cidx[i]);

  double width_scale = 1.0;
  if (cfg.widths_relative)
    width_scale = median_heuristic(dtr.Y, mix_seed(cfg.seed, 0x3ed, 0));

  std::vector<Index> dims;
  dims.push_back(data.dx());
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.d);
  const std::uint64_t net_seed = mix_seed(cfg.seed, 0x111, 0);
  const std::uint64_t shuffle_seed = mix_seed(cfg.seed, 0x5f1e, 0);

  TrainReport report;
  report.train_indices = tr;
  report.val_indices = va;
  report.sample_grad_counts.assign(static_cast<std::size_t>(T), 0);

  Snapshot global;
  Index cand_id = 0;
  for (double width : cfg.width_grid) {
    const double sigma = width * width_scale;
    for (double lr : cfg.lr_grid) {
      CandidateRecord rec;
      rec.lr = lr;
      rec.width = width;

      KernelBasis basis{centers, sigma};
      Rng net_rng(net_seed);
      Mlp net = Mlp::init(dims, cfg.out_act, net_rng);
      Matrix alpha = Matrix::Zero(cfg.d, basis.feature_dim());
      Matrix alpha_state = Matrix::Zero(alpha.rows(), alpha.cols());
      MlpGrads state;
      for (const auto& W : net.W) state.W.push_back(Matrix::Zero(W.rows(), W.cols()));
      for (const auto& b : net.b) state.b.push_back(Vector::Zero(b.size()));

      Rng shuffle_rng(shuffle_seed);
      Snapshot local;
      bool diverged = false;
      for (Index ep = 0; ep < cfg.epochs && !diverged; ++ep) {
        const auto order = shuffle_rng.permutation(ntr);
        for (Index i0 = 0; i0 < ntr && !diverged; i0 += cfg.minibatch) {
          const Index nb = std::min(cfg.minibatch, ntr - i0);
          Matrix Yb(nb, data.dy()), Xb(nb, data.dx());
          for (Index i = 0; i < nb; ++i) {
            const Index row = order[static_cast<std::size_t>(i0 + i)];
            Yb.row(i) = dtr.Y.row(row);
            Xb.row(i) = dtr.X.row(row);
            ++report.sample_grad_counts[static_cast<std::size_t>(tr[static_cast<std::size_t>(row)])];
          }
          const ObjectiveResult res =
              objective_gradients(Yb, Xb, alpha, net, basis, cfg.l2_alpha);
          if (!std::isfinite(res.value)) {
            diverged = true;
            break;
          }
          rmsprop_step(alpha, res.grad_alpha, alpha_state, lr, cfg.rmsprop_decay,
                       cfg.rmsprop_epsilon);
          for (std::size_t l = 0; l < net.W.size(); ++l) {
            rmsprop_step(net.W[l], res.grad_theta.W[l], state.W[l], lr,
                         cfg.rmsprop_decay, cfg.rmsprop_epsilon);
            rmsprop_step(net.b[l], res.grad_theta.b[l], state.b[l], lr,
                         cfg.rmsprop_decay, cfg.rmsprop_epsilon);
          }
        }
        if (diverged) break;
        const double jtr = objective_value(dtr.Y, dtr.X, alpha, net, basis, 0.0);
        const double jva = objective_value(dva.Y, dva.X, alpha, net, basis, 0.0);
        if (!std::isfinite(jva) || !std::isfinite(jtr)) {
          diverged = true;
          break;
        }
        rec.train_j.push_back(jtr);
        rec.val_j.push_back(jva);
        if (jva < local.val_j) {
          local.val_j = jva;
          local.alpha = alpha;
          local.net = net;
          local.sigma = sigma;
          local.lr = lr;
          local.width = width;
          local.epoch = ep;
          local.candidate = cand_id;
        }
      }
      rec.diverged = diverged;
      report.candidates.push_back(std::move(rec));
      if (!diverged && local.val_j < global.val_j) global = std::move(local);
      ++cand_id;
    }
  }

  if (global.candidate < 0)
    throw NumericalError("all training candidates diverged");

  report.chosen_candidate = global.candidate;
  report.chosen_lr = global.lr;
  report.chosen_width = global.width;
  report.best_epoch = global.epoch;
  report.best_val_j = global.val_j;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  NkcModel model;
  model.basis = KernelBasis{centers, global.sigma};
  model.alpha = std::move(global.alpha);
  model.net = std::move(global.net);
  model.standardization = Standardizer::identity(data.dy(), data.dx());
  model.meta.d = cfg.d;
  model.meta.d_y = data.dy();
  model.meta.d_x = data.dx();
  model.meta.seed = cfg.seed;
  model.meta.version = kArtifactVersion;
  return {std::move(model), std::move(report)};
}

}  // namespace nkc
