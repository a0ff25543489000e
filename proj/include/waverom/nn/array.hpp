#ifndef WAVEROM_NN_ARRAY_HPP
#define WAVEROM_NN_ARRAY_HPP

#include <Eigen/Dense>
#include <initializer_list>
#include <vector>

#include "waverom/common.hpp"

namespace waverom::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major tensor with up to 4 axes. Image batches use NHWC layout.
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<int> shape, double fill = 0.0);

  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int shape(int axis) const { return shape_.at(axis); }
  Eigen::Index size() const { return static_cast<Eigen::Index>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](Eigen::Index i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](Eigen::Index i) const { return data_[static_cast<std::size_t>(i)]; }

  /// 2D view with shape[0] rows and size/shape[0] columns.
  Eigen::Map<RowMat> matrix();
  Eigen::Map<const RowMat> matrix() const;
  /// 2D view with an explicit row count (size must divide evenly).
  Eigen::Map<RowMat> matrix_rows(int rows);
  Eigen::Map<const RowMat> matrix_rows(int rows) const;
  /// Flat view.
  Eigen::Map<Eigen::VectorXd> flat();
  Eigen::Map<const Eigen::VectorXd> flat() const;

  /// Same data, new shape (element counts must match).
  Array reshaped(std::vector<int> new_shape) const;

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Array& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace waverom::nn

#endif
