#pragma once

#include <cstdint>
#include <vector>

#include "nkc/dataset.hpp"
#include "nkc/types.hpp"

namespace nkc {

// Least-squares conditional density baseline with joint Gaussian kernels
// centered on randomly chosen training pairs.
struct LscdeModel {
  Matrix Yc;  // B x d_y
  Matrix Xc;  // B x d_x
  double sigma = 1.0;
  double lambda = 0.1;
  Vector beta;  // B, nonnegative
};

// Regularized least-squares system for a fixed bandwidth.
struct LscdeSystem {
  Matrix H;  // B x B
  Vector h;  // B
};
LscdeSystem lscde_system(const Dataset& data, const Matrix& Yc, const Matrix& Xc,
                         double sigma);

// Native least-squares criterion beta'H beta / 2 - h'beta on the given data.
double lscde_ls_criterion(const LscdeModel& model, const Dataset& data);

// {0.3, 0.5, 1, 2, 3} times the median heuristic over concatenated (y, x).
std::vector<double> lscde_default_sigma_grid(const Dataset& data, std::uint64_t seed);

inline const std::vector<double> kLscdeDefaultLambdaGrid{1e-3, 1e-2, 1e-1, 1.0};

LscdeModel lscde_fit(const Dataset& train, Index center_count,
                     const std::vector<double>& sigma_grid,
                     const std::vector<double>& lambda_grid, Index folds,
                     std::uint64_t seed);

struct LscdeEval {
  double mean_loglik = 0.0;
  Vector per_sample;  // flagged entries excluded from the mean
  double se = 0.0;
  Index flagged = 0;
  std::vector<Index> flagged_rows;
};

// Mean log p(y|x) with analytic y-normalization; nonpositive partitions are
// flagged and excluded, zero numerators floored at 1e-12.
LscdeEval lscde_cond_log_likelihood(const LscdeModel& model, const Dataset& test);

// Normalized conditional density at (y, x); requires a positive partition.
double lscde_density(const LscdeModel& model, const Vector& y, const Vector& x);

// Analytic partition integral of the unnormalized model over y at fixed x.
double lscde_partition(const LscdeModel& model, const Vector& x);

}  // namespace nkc
