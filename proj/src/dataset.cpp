#include "nkc/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nkc/errors.hpp"
#include "nkc/rng.hpp"

namespace nkc {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, Index row, Index col) {
  const char* s = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(v))
    throw DataError("bad numeric cell at row " + std::to_string(row) +
                    ", column " + std::to_string(col) + ": '" + cell + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_line(line);

  Index dy = 0;
  while (dy < static_cast<Index>(header.size()) &&
         header[static_cast<std::size_t>(dy)] == "y_" + std::to_string(dy + 1))
    ++dy;
  Index dx = 0;
  while (dy + dx < static_cast<Index>(header.size()) &&
         header[static_cast<std::size_t>(dy + dx)] == "x_" + std::to_string(dx + 1))
    ++dx;
  if (dy == 0 || dx == 0 || dy + dx != static_cast<Index>(header.size()))
    throw DataError("bad CSV header, expected y_1..y_dy,x_1..x_dx: " + path);

  std::vector<double> values;
  Index rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (static_cast<Index>(cells.size()) != dy + dx)
      throw DataError("row " + std::to_string(rows + 1) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(dy + dx));
    for (Index c = 0; c < dy + dx; ++c)
      values.push_back(parse_cell(cells[static_cast<std::size_t>(c)], rows + 1, c + 1));
    ++rows;
  }
  if (rows == 0) throw DataError("dataset has no data rows: " + path);

  Dataset ds;
  ds.Y.resize(rows, dy);
  ds.X.resize(rows, dx);
  for (Index r = 0; r < rows; ++r) {
    const double* p = values.data() + r * (dy + dx);
    for (Index j = 0; j < dy; ++j) ds.Y(r, j) = p[j];
    for (Index j = 0; j < dx; ++j) ds.X(r, j) = p[dy + j];
  }
  return ds;
}

void save_dataset_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (Index j = 0; j < ds.dy(); ++j)
    out << (j ? "," : "") << "y_" << (j + 1);
  for (Index j = 0; j < ds.dx(); ++j) out << ",x_" << (j + 1);
  out << "\n";
  for (Index r = 0; r < ds.rows(); ++r) {
    for (Index j = 0; j < ds.dy(); ++j)
      out << (j ? "," : "") << format_double(ds.Y(r, j));
    for (Index j = 0; j < ds.dx(); ++j) out << "," << format_double(ds.X(r, j));
    out << "\n";
  }
  if (!out) throw DataError("write failed: " + path);
}

namespace {

void column_stats(const Matrix& M, Vector& mean, Vector& scale, char tag) {
  const double n = static_cast<double>(M.rows());
  mean = M.colwise().mean().transpose();
  scale.resize(M.cols());
  for (Index j = 0; j < M.cols(); ++j) {
    const double var = (M.col(j).array() - mean(j)).square().sum() / n;
    scale(j) = std::sqrt(var);
    if (!(scale(j) > 1e-12))
      throw DataError(std::string("constant column ") + tag + "_" +
                      std::to_string(j + 1) + " cannot be standardized");
  }
}

}  // namespace

Standardizer Standardizer::fit(const Dataset& train) {
  if (train.rows() < 2) throw DataError("need at least 2 rows to standardize");
  Standardizer s;
  column_stats(train.Y, s.y_mean, s.y_scale, 'y');
  column_stats(train.X, s.x_mean, s.x_scale, 'x');
  return s;
}

Standardizer Standardizer::identity(Index dy, Index dx) {
  Standardizer s;
  s.y_mean = Vector::Zero(dy);
  s.y_scale = Vector::Ones(dy);
  s.x_mean = Vector::Zero(dx);
  s.x_scale = Vector::Ones(dx);
  return s;
}

Dataset Standardizer::transform(const Dataset& ds) const {
  Dataset out;
  out.Y = ((ds.Y.rowwise() - y_mean.transpose()).array().rowwise() /
           y_scale.transpose().array())
              .matrix();
  out.X = ((ds.X.rowwise() - x_mean.transpose()).array().rowwise() /
           x_scale.transpose().array())
              .matrix();
  return out;
}

Dataset Standardizer::inverse(const Dataset& ds) const {
  Dataset out;
  out.Y = (ds.Y.array().rowwise() * y_scale.transpose().array()).matrix().rowwise() +
          y_mean.transpose();
  out.X = (ds.X.array().rowwise() * x_scale.transpose().array()).matrix().rowwise() +
          x_mean.transpose();
  return out;
}

double Standardizer::log_scale_y_sum() const {
  return y_scale.array().log().sum();
}

bool Standardizer::is_identity() const {
  return y_mean.isZero(0) && x_mean.isZero(0) &&
         (y_scale.array() == 1.0).all() && (x_scale.array() == 1.0).all();
}

Dataset take_rows(const Dataset& ds, const std::vector<Index>& rows) {
  Dataset out;
  out.Y.resize(static_cast<Index>(rows.size()), ds.dy());
  out.X.resize(static_cast<Index>(rows.size()), ds.dx());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.Y.row(static_cast<Index>(i)) = ds.Y.row(rows[i]);
    out.X.row(static_cast<Index>(i)) = ds.X.row(rows[i]);
  }
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          double second_fraction,
                                          std::uint64_t seed) {
  if (!(second_fraction >= 0.0 && second_fraction < 1.0))
    throw ConfigError("split fraction must be in [0, 1)");
  const Index n = ds.rows();
  const Index n2 = static_cast<Index>(std::llround(static_cast<double>(n) * second_fraction));
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<Index> first(perm.begin(), perm.end() - n2);
  std::vector<Index> second(perm.end() - n2, perm.end());
  return {take_rows(ds, first), take_rows(ds, second)};
}

}  // namespace nkc
