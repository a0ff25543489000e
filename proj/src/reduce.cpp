#include "waverom/reduce.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>

#include "waverom/io.hpp"

namespace waverom::reduce {

int truncate_rank(const Vector& singular_values, double eps_svd) {
  if (!(eps_svd > 0.0 && eps_svd < 1.0)) throw ConfigError("eps_svd must lie in (0, 1)");
  const int n = static_cast<int>(singular_values.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += singular_values[i] * singular_values[i];
  if (total == 0.0) return 0;
  double tail = total;
  for (int r = 0; r < n; ++r) {
    tail -= singular_values[r] * singular_values[r];
    if (std::sqrt(std::max(tail, 0.0) / total) <= eps_svd) return r + 1;
  }
  return n;
}

ReducedBasis::ReducedBasis(double eps_svd) : eps_svd_(eps_svd) {
  if (!(eps_svd > 0.0 && eps_svd < 1.0)) throw ConfigError("eps_svd must lie in (0, 1)");
}

void ReducedBasis::update(const Eigen::Ref<const Matrix>& batch) {
  if (batch.cols() == 0) return;
  if (rank() > 0 && batch.rows() != basis_.rows())
    throw ConfigError("svd update: batch has " + std::to_string(batch.rows()) +
                      " rows, basis has " + std::to_string(basis_.rows()));

  // Keep the residual QR tall: fold wide batches in column chunks.
  if (batch.cols() > batch.rows()) {
    const Eigen::Index chunk = batch.rows();
    for (Eigen::Index start = 0; start < batch.cols(); start += chunk)
      update(batch.middleCols(start, std::min(chunk, batch.cols() - start)));
    return;
  }

  if (rank() == 0) {
    Eigen::BDCSVD<Matrix> svd(batch, Eigen::ComputeThinU);
    const int r = truncate_rank(svd.singularValues(), eps_svd_);
    basis_ = svd.matrixU().leftCols(r);
    singular_values_ = svd.singularValues().head(r);
    columns_seen_ += batch.cols();
    return;
  }

  const int r = rank();
  const Eigen::Index b = batch.cols();

  // Split the batch into its component inside the current range and the
  // orthonormalized residual, then diagonalize the small augmented core.
  Matrix proj = basis_.transpose() * batch;              // r x b
  Matrix residual = batch - basis_ * proj;               // N_h x b
  Eigen::HouseholderQR<Matrix> qr(residual);
  Matrix q = qr.householderQ() * Matrix::Identity(residual.rows(), b);
  Matrix rr = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();

  Matrix core = Matrix::Zero(r + b, r + b);
  core.topLeftCorner(r, r) = singular_values_.asDiagonal();
  core.topRightCorner(r, b) = proj;
  core.bottomRightCorner(b, b) = rr;

  Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU);
  const int new_rank = truncate_rank(svd.singularValues(), eps_svd_);

  Matrix joint(basis_.rows(), r + b);
  joint.leftCols(r) = basis_;
  joint.rightCols(b) = q;
  basis_ = joint * svd.matrixU().leftCols(new_rank);
  singular_values_ = svd.singularValues().head(new_rank);
  columns_seen_ += b;

  reorthonormalize_if_needed();
}

double ReducedBasis::orthogonality_drift() const {
  if (rank() == 0) return 0.0;
  Matrix gram = basis_.transpose() * basis_;
  gram.diagonal().array() -= 1.0;
  return gram.cwiseAbs().maxCoeff();
}

void ReducedBasis::reorthonormalize_if_needed() {
  if (orthogonality_drift() <= 1e-8) return;
  Eigen::HouseholderQR<Matrix> qr(basis_);
  basis_ = qr.householderQ() * Matrix::Identity(basis_.rows(), rank());
}

double ReducedBasis::compression_ratio() const {
  if (columns_seen_ == 0) throw ConfigError("compression ratio undefined before any update");
  return static_cast<double>(rank()) / static_cast<double>(columns_seen_);
}

void ReducedBasis::save(const std::filesystem::path& path) const {
  io::write_array(path, basis_);
  io::write_array(path.string() + ".sv", Matrix(singular_values_));
  io::KvPairs kv;
  kv.emplace_back("kind", "basis");
  kv.emplace_back("rank", std::to_string(rank()));
  kv.emplace_back("eps_svd", io::format_double(eps_svd_));
  kv.emplace_back("columns_seen", std::to_string(columns_seen_));
  io::write_kv(path.string() + ".meta", kv);
}

ReducedBasis ReducedBasis::load(const std::filesystem::path& path) {
  auto kv = io::read_kv(path.string() + ".meta");
  const std::string meta = path.string() + ".meta";
  ReducedBasis basis(io::parse_double(io::require(kv, "eps_svd", meta), "eps_svd"));
  basis.basis_ = io::read_array(path);
  basis.singular_values_ = io::read_array(path.string() + ".sv");
  basis.columns_seen_ = io::parse_long(io::require(kv, "columns_seen", meta), "columns_seen");
  return basis;
}

Matrix project(const Matrix& basis, const Matrix& snapshots) {
  if (basis.rows() != snapshots.rows())
    throw ConfigError("project: dimension mismatch");
  return basis.transpose() * snapshots;
}

Matrix reconstruct(const Matrix& basis, const Matrix& coords) {
  if (basis.cols() != coords.rows())
    throw ConfigError("reconstruct: dimension mismatch");
  return basis * coords;
}

double reconstruction_error(const Matrix& snapshots, const Matrix& basis) {
  const double norm = snapshots.norm();
  if (norm == 0.0) throw NumericError("reconstruction error undefined for zero snapshot matrix");
  if (basis.cols() == 0) return 1.0;
  if (basis.rows() != snapshots.rows())
    throw ConfigError("reconstruction_error: dimension mismatch");
  const Matrix residual = snapshots - basis * (basis.transpose() * snapshots);
  return residual.norm() / norm;
}

double mean_test_error(const std::vector<Matrix>& test_snapshots, const Matrix& basis) {
  if (test_snapshots.empty()) throw ConfigError("mean_test_error: empty test set");
  double sum = 0.0;
  for (const auto& s : test_snapshots) sum += reconstruction_error(s, basis);
  return sum / static_cast<double>(test_snapshots.size());
}

Matrix zero_pad_basis(const Matrix& basis, int target_rank) {
  if (target_rank < basis.cols())
    throw ConfigError("zero_pad_basis: target below current rank");
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(target_rank))));
  if (side * side != target_rank)
    throw ConfigError("zero_pad_basis: target must be a perfect square");
  if (target_rank == basis.cols()) return basis;
  Matrix padded = Matrix::Zero(basis.rows(), target_rank);
  padded.leftCols(basis.cols()) = basis;
  return padded;
}

int default_pad_target(int rank) {
  int side = 8;
  while (side * side < rank) side += 8;
  return side * side;
}

}  // namespace waverom::reduce
