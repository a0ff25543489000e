#ifndef WAVEROM_REDUCE_HPP
#define WAVEROM_REDUCE_HPP

#include <filesystem>
#include <vector>

#include "waverom/common.hpp"

namespace waverom::reduce {

/// Smallest rank r with sqrt(sum_{i>r} s_i^2 / sum_i s_i^2) <= eps
/// (relative residual-energy criterion). An all-zero spectrum gives rank 0.
int truncate_rank(const Vector& singular_values, double eps_svd);

/// Orthonormal reduced basis grown by streaming low-rank SVD updates.
/// Each update projects the incoming columns onto the current basis,
/// orthonormalizes the residual, takes the SVD of the small augmented core
/// matrix, and truncates by the energy criterion.
class ReducedBasis {
 public:
  explicit ReducedBasis(double eps_svd);

  /// Fold a batch of snapshot columns into the basis. Throws ConfigError on
  /// row-count mismatch with the existing basis.
  void update(const Eigen::Ref<const Matrix>& batch);

  int rank() const { return static_cast<int>(basis_.cols()); }
  long columns_seen() const { return columns_seen_; }
  double eps_svd() const { return eps_svd_; }
  const Matrix& basis() const { return basis_; }
  const Vector& singular_values() const { return singular_values_; }

  /// rank / columns_seen. Requires at least one processed column.
  double compression_ratio() const;

  /// Max deviation of U^T U from identity.
  double orthogonality_drift() const;

  void save(const std::filesystem::path& path) const;
  static ReducedBasis load(const std::filesystem::path& path);

 private:
  void reorthonormalize_if_needed();

  double eps_svd_;
  Matrix basis_;           // N_h x rank
  Vector singular_values_; // rank, non-increasing
  long columns_seen_ = 0;
};

/// Reduced coordinates U^T S.
Matrix project(const Matrix& basis, const Matrix& snapshots);

/// Full-field reconstruction U * coords.
Matrix reconstruct(const Matrix& basis, const Matrix& coords);

/// Relative Frobenius reconstruction error ||S - U U^T S||_F / ||S||_F.
/// Throws NumericError when ||S||_F == 0.
double reconstruction_error(const Matrix& snapshots, const Matrix& basis);

/// Arithmetic mean of reconstruction_error over a test set. Throws
/// ConfigError on an empty set.
double mean_test_error(const std::vector<Matrix>& test_snapshots, const Matrix& basis);

/// Append zero columns up to target_rank. target_rank must be a perfect
/// square >= current column count (latent images reshape to square).
Matrix zero_pad_basis(const Matrix& basis, int target_rank);

/// Smallest admissible zero-padding target for a rank: a perfect square
/// whose side is a multiple of 8 (two pooling halvings plus the decoder's
/// one-eighth-size seed image all stay integral).
int default_pad_target(int rank);

}  // namespace waverom::reduce

#endif
