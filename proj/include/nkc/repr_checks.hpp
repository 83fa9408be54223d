#pragma once

#include <cstdint>

#include "nkc/trainer.hpp"
#include "nkc/types.hpp"

namespace nkc {

// Latent sources with Gaussian-variance modulation by an auxiliary scalar y:
// s_i | y ~ N(0, 1/lambda_i(y)), observed x = f(s) with f either the identity
// or a composition of two invertible linear maps around a leaky ReLU.
struct IcaGenerator {
  Index d = 2;
  std::uint64_t seed = 0;
  bool identity_mixing = false;
  bool constant_lambda = false;  // degenerate: no modulation
  Vector a, b, c, om, ph;        // lambda_i(y) = softplus(a y + b + c sin(om y + ph)) + 0.1
  Matrix L1, L2;                 // invertible linear factors

  static IcaGenerator make(Index d, std::uint64_t seed, bool identity_mixing,
                           bool constant_lambda = false);

  Matrix lambda(const Vector& y) const;     // N x d, strictly positive
  Matrix lambda_dy(const Vector& y) const;  // analytic derivative in y

  struct Triple {
    Matrix y;  // N x 1 auxiliary variable, standard normal
    Matrix s;  // N x d latent sources
    Matrix x;  // N x d observed mixture
  };
  Triple sample(Index T, std::uint64_t sample_seed) const;
};

// Smallest eigenvalue of the Gram matrix of modulator gradients at n_points
// auxiliary draws; near zero means the sources are not identifiable.
double i5_min_eigenvalue(const IcaGenerator& gen, Index n_points,
                         std::uint64_t seed);

struct AffineRecoveryReport {
  Matrix B;             // fitted map from h(x) to the true statistics
  Vector b;
  Vector r2;            // per-component held-out R^2
  double mean_r2 = 0.0;
  double cond_B = 0.0;
  double mean_abs_corr = 0.0;  // after greedy component assignment
  double i5_min_eig = 0.0;
  double chosen_width = 0.0;
  double chosen_lr = 0.0;
};

// Trains on (y, x), then regresses the true statistics -s^2/2 on h(x) over
// held-out rows.
AffineRecoveryReport ica_experiment(const IcaGenerator& gen, Index T,
                                    const TrainConfig& cfg);

struct SdrReport {
  Index d_low = 0, d_high = 0;
  double loglik_low = 0.0;   // original-scale test log-likelihood at d_low
  double loglik_high = 0.0;  // at d_high = d_low + 2
  double gap = 0.0;          // loglik_high - loglik_low
  double pred_mse_h = 0.0;   // linear prediction of y from h(x)
  double pred_mse_x = 0.0;   // from x directly
  double pred_mse_baseline = 0.0;  // unconditional mean predictor
};

// y depends on x only through z = mean of tanh(2 x_i) over the first d_true
// coordinates (variance modulation); d_true = 0 makes y independent of x.
SdrReport sdr_experiment(Index d_true, Index d_x, Index T,
                         const TrainConfig& base_cfg, std::uint64_t seed,
                         Index is_samples = 10000);

// Dataset for the SDR construction, exposed for paired-permutation checks.
Dataset sdr_dataset(Index d_true, Index d_x, Index T, std::uint64_t seed);

}  // namespace nkc
