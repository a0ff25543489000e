#include "waverom/nn/array.hpp"

#include <cmath>
#include <numeric>

namespace waverom::nn {

namespace {
Eigen::Index checked_count(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 4)
    throw ConfigError("array shape must have 1..4 axes");
  Eigen::Index count = 1;
  for (int s : shape) {
    if (s < 1) throw ConfigError("array axes must be positive");
    count *= s;
  }
  return count;
}
}  // namespace

Array::Array(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(checked_count(shape_)), fill) {}

Eigen::Map<RowMat> Array::matrix() { return matrix_rows(shape_.at(0)); }
Eigen::Map<const RowMat> Array::matrix() const { return matrix_rows(shape_.at(0)); }

Eigen::Map<RowMat> Array::matrix_rows(int rows) {
  if (rows < 1 || size() % rows != 0) throw ConfigError("array: bad matrix row count");
  return {data(), rows, size() / rows};
}

Eigen::Map<const RowMat> Array::matrix_rows(int rows) const {
  if (rows < 1 || size() % rows != 0) throw ConfigError("array: bad matrix row count");
  return {data(), rows, size() / rows};
}

Eigen::Map<Eigen::VectorXd> Array::flat() { return {data(), size()}; }
Eigen::Map<const Eigen::VectorXd> Array::flat() const { return {data(), size()}; }

Array Array::reshaped(std::vector<int> new_shape) const {
  if (checked_count(new_shape) != size())
    throw ConfigError("array reshape: element count mismatch");
  Array out = *this;
  out.shape_ = std::move(new_shape);
  return out;
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Array::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace waverom::nn
