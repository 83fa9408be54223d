#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nkc/dataset.hpp"
#include "nkc/estimator.hpp"
#include "nkc/types.hpp"

namespace nkc {

struct TrainConfig {
  Index d = 3;
  Index B = 100;
  Index minibatch = 128;
  Index epochs = 100;
  double val_fraction = 0.2;
  std::vector<double> lr_grid{1e-3, 5e-4, 1e-4, 5e-5, 1e-5};
  std::vector<double> width_grid{0.5, 1.0, 3.0, 5.0};
  // When set, width_grid entries are multiples of the y median heuristic.
  bool widths_relative = false;
  double l2_alpha = 1e-4;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::vector<Index> hidden{100, 50};
  OutAct out_act = OutAct::linear;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct CandidateRecord {
  double lr = 0.0;
  double width = 0.0;
  bool diverged = false;
  std::vector<double> train_j;  // per epoch, l2 excluded
  std::vector<double> val_j;
};

struct TrainReport {
  std::vector<CandidateRecord> candidates;
  Index chosen_candidate = -1;
  double chosen_lr = 0.0;
  double chosen_width = 0.0;
  Index best_epoch = -1;
  double best_val_j = 0.0;
  double wall_seconds = 0.0;
  // Instrumentation (not serialized): dataset row ids by role and how often
  // each row entered a gradient minibatch.
  std::vector<Index> train_indices, val_indices;
  std::vector<long> sample_grad_counts;
};

// Median pairwise Euclidean distance; subsamples to <= cap points when larger.
double median_heuristic(const Matrix& Y, std::uint64_t seed, Index cap = 2000);

// state <- decay*state + (1-decay)*g^2; p -= lr * g / sqrt(state + eps).
void rmsprop_step(Matrix& params, const Matrix& grads, Matrix& state, double lr,
                  double decay, double epsilon);
void rmsprop_step(Vector& params, const Vector& grads, Vector& state, double lr,
                  double decay, double epsilon);

// Grid-searched minibatch RMSprop fit; returns the best-epoch snapshot across
// all non-diverged candidates by validation objective.
std::pair<NkcModel, TrainReport> fit(const Dataset& data, const TrainConfig& cfg);

}  // namespace nkc
