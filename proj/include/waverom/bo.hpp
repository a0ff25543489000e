#ifndef WAVEROM_BO_HPP
#define WAVEROM_BO_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "waverom/gpr.hpp"
#include "waverom/hfm.hpp"
#include "waverom/params.hpp"
#include "waverom/reduce.hpp"

namespace waverom::bo {

enum class AcquisitionKind { ProbabilityOfImprovement, ExpectedImprovement };

AcquisitionKind acquisition_from_string(const std::string& name);
std::string to_string(AcquisitionKind kind);

struct AcquisitionConfig {
  AcquisitionKind kind = AcquisitionKind::ExpectedImprovement;
  double xi = 0.01;      // exploration margin, in standardized target units
  int pool_size = 10000; // LHS candidate pool size
};

/// Probability of improvement Phi(Delta / sigma), Delta = mu - f_max - xi.
/// At sigma == 0 the score degenerates to 1 if Delta > 0 else 0.
double acquisition_pi(double mean, double sigma, double f_max, double xi);

/// Expected improvement sigma phi(Delta/sigma) + Delta Phi(Delta/sigma);
/// max(Delta, 0) at sigma == 0.
double acquisition_ei(double mean, double sigma, double f_max, double xi);

/// Latin hypercube sample over the 4-sigma feature bounds: each feature's
/// range split into `count` equal strata, one point per stratum, strata
/// permuted independently per feature. Draws whose temperature-corrected
/// material is unphysical force a reseeded redraw of the whole design.
std::vector<ParameterVector> lhs_sample(const ParameterSpace& space, int count,
                                        std::uint64_t seed);

/// Argmax of the acquisition over a seeded LHS candidate pool; ties broken
/// by lowest pool index. Scores are evaluated on the model's standardized
/// target scale.
ParameterVector propose_next(const gpr::GprModel& model, const AcquisitionConfig& acq,
                             const ParameterSpace& space, std::uint64_t seed);

struct BoRunConfig {
  int initial_count = 4;    // tau
  int testing_count = 10;   // n
  double eps_svd = 7e-4;
  double eps_tol = 9e-4;
  int max_iterations = 100; // guard: total training vectors never exceeds this
  int batch_splits = 4;     // column batches per snapshot fed to the SVD update
  gpr::KernelConfig kernel;
  AcquisitionConfig acquisition;
  std::uint64_t seed = 1;
};

struct BoIterationRecord {
  int iteration;            // training-set size after this step
  ParameterVector chosen;
  double mean_test_error;   // eps_s against the current basis
  int rank;
  double seconds;
};

struct LabeledSample {
  ParameterVector theta;
  double error;  // reconstruction error against the latest basis
};

struct BoResult {
  std::vector<ParameterVector> training;
  std::vector<hfm::SnapshotMatrix> training_snapshots;
  std::vector<ParameterVector> testing;
  std::vector<hfm::SnapshotMatrix> testing_snapshots;
  reduce::ReducedBasis basis{1e-4};
  std::vector<LabeledSample> labels;
  std::vector<BoIterationRecord> trace;
  bool converged = false;
};

using HfmCallback = std::function<hfm::SnapshotMatrix(const ParameterVector&)>;

/// Sequential adaptive sampling fused with the SVD update:
/// seed with LHS, simulate, build the basis, label reconstruction errors,
/// then loop { fit GPR, propose by acquisition argmax, simulate, update
/// basis, relabel every stored error against the new basis, recompute the
/// mean test error } until it drops below eps_tol or the iteration guard
/// trips (converged == false).
BoResult run_bo(const BoRunConfig& config, const ParameterSpace& space,
                const HfmCallback& hfm_solve);

/// One-shot baseline: LHS-draw `count` points, simulate, fold everything
/// into a basis with the same batching as run_bo, and label errors.
BoResult run_lhs(const BoRunConfig& config, const ParameterSpace& space, int count,
                 const HfmCallback& hfm_solve);

}  // namespace waverom::bo

#endif
