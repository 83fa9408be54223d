#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "nkc/dataset.hpp"
#include "nkc/kernel_basis.hpp"
#include "nkc/mlp.hpp"
#include "nkc/types.hpp"

namespace nkc {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct ModelMeta {
  Index d = 0;
  Index d_y = 0;
  Index d_x = 0;
  std::uint64_t seed = 0;
  std::string version = kArtifactVersion;
};

// Fitted conditional model log q(y|x) = sum_i (alpha_i' phi(y)) h_i(x).
struct NkcModel {
  KernelBasis basis;
  Matrix alpha;  // d x feature_dim
  Mlp net;
  Standardizer standardization;  // identity when fitted on raw data
  ModelMeta meta;
};

double log_unnormalized(const NkcModel& model, const Vector& y, const Vector& x);
Vector log_unnormalized_batch(const NkcModel& model, const Matrix& Y, const Matrix& X);

// Gradient of log q(y|x) in y; equals the conditional score of the model.
Vector score_y(const NkcModel& model, const Vector& y, const Vector& x);
Matrix score_y_batch(const NkcModel& model, const Matrix& Y, const Matrix& X);

// Diagonal-Gaussian importance proposal over y-space.
struct Proposal {
  Vector mean;
  Vector var;
  Index M = 10000;
};

// Moment-matched to the given y sample, variances doubled.
Proposal make_proposal(const Matrix& train_y, Index M = 10000);

struct LogPartition {
  double value = 0.0;
  double se = 0.0;  // jackknife standard error
};

// log integral of exp(unnorm(y)) dy by self-normalized importance sampling.
LogPartition log_partition(const std::function<double(const Vector&)>& unnorm,
                           const Proposal& proposal, std::uint64_t seed);

struct EvalReport {
  double mean_loglik = 0.0;
  Vector per_sample;
  double se = 0.0;  // standard error of the mean over test samples
  bool original_scale = false;
  double log_scale_correction = 0.0;  // subtracted when original_scale is set
  Index proposal_samples = 0;
  std::uint64_t seed = 0;
};

// Mean log p(y|x) over the test set; `test` must be in the model's training
// scale. With original_scale the per-sample values get the Jacobian correction
// for the model's y standardization.
EvalReport cond_log_likelihood(const NkcModel& model, const Dataset& test,
                               const Proposal& proposal, std::uint64_t seed,
                               bool original_scale = false);

// Normalized density on a strictly increasing 1-D grid (trapezoid rule).
Vector density_grid(const NkcModel& model, const Vector& x, const Vector& y_grid);

// Seed stream tag for the per-test-sample partition estimates.
std::uint64_t eval_sample_seed(std::uint64_t seed, Index sample_index);

}  // namespace nkc
