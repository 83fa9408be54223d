#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nkc/types.hpp"

namespace nkc {

// Paired samples, one row per observation.
struct Dataset {
  Matrix Y;  // T x d_y
  Matrix X;  // T x d_x
  Index rows() const { return Y.rows(); }
  Index dy() const { return Y.cols(); }
  Index dx() const { return X.cols(); }
};

// CSV format: header `y_1,...,y_{d_y},x_1,...,x_{d_x}`, one row per sample.
Dataset load_dataset_csv(const std::string& path);
void save_dataset_csv(const std::string& path, const Dataset& ds);

// Column-wise affine rescaling fitted on training data only.
struct Standardizer {
  Vector y_mean, y_scale, x_mean, x_scale;

  static Standardizer fit(const Dataset& train);
  static Standardizer identity(Index dy, Index dx);

  Dataset transform(const Dataset& ds) const;
  Dataset inverse(const Dataset& ds) const;
  // Jacobian term for mapping log-densities back to the original y scale.
  double log_scale_y_sum() const;
  bool is_identity() const;
};

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows);

// Seeded uniform split; the second part gets round(T * second_fraction) rows.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          double second_fraction,
                                          std::uint64_t seed);

}  // namespace nkc
