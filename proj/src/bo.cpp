#include "waverom/bo.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "waverom/rng.hpp"

namespace waverom::bo {

AcquisitionKind acquisition_from_string(const std::string& name) {
  if (name == "pi") return AcquisitionKind::ProbabilityOfImprovement;
  if (name == "ei") return AcquisitionKind::ExpectedImprovement;
  throw ConfigError("unknown acquisition '" + name + "' (expected pi|ei)");
}

std::string to_string(AcquisitionKind kind) {
  return kind == AcquisitionKind::ProbabilityOfImprovement ? "pi" : "ei";
}

double acquisition_pi(double mean, double sigma, double f_max, double xi) {
  const double delta = mean - f_max - xi;
  if (sigma <= 0.0) return delta > 0.0 ? 1.0 : 0.0;
  return norm_cdf(delta / sigma);
}

double acquisition_ei(double mean, double sigma, double f_max, double xi) {
  const double delta = mean - f_max - xi;
  if (sigma <= 0.0) return std::max(delta, 0.0);
  const double z = delta / sigma;
  return sigma * norm_pdf(z) + delta * norm_cdf(z);
}

std::vector<ParameterVector> lhs_sample(const ParameterSpace& space, int count,
                                        std::uint64_t seed) {
  if (count < 1) throw ConfigError("lhs_sample: count must be >= 1");
  const int xi = space.dim();
  for (int attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, "lhs-" + std::to_string(attempt)));
    std::vector<ParameterVector> points(count, ParameterVector(Vector::Zero(xi)));
    for (int f = 0; f < xi; ++f) {
      const double lo = space.lower(f);
      const double width = (space.upper(f) - lo) / count;
      const std::vector<int> strata = rng.permutation(count);
      for (int k = 0; k < count; ++k)
        points[k][f] = lo + (strata[k] + rng.uniform01()) * width;
    }
    bool all_valid = true;
    for (const auto& p : points) all_valid = all_valid && material_valid(p);
    if (all_valid) return points;
    if (attempt > 256) throw ConfigError("lhs_sample: no feasible design found");
  }
}

ParameterVector propose_next(const gpr::GprModel& model, const AcquisitionConfig& acq,
                             const ParameterSpace& space, std::uint64_t seed) {
  if (acq.pool_size < 1) throw ConfigError("propose_next: empty candidate pool");
  const auto pool = lhs_sample(space, acq.pool_size, seed);

  // Incumbent on the standardized scale the model was fit on.
  const double f_max = model.max_target_standardized();

  double best_score = -std::numeric_limits<double>::infinity();
  int best_index = -1;
  for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
    const auto p = model.posterior_standardized(pool[i].coeffs());
    const double sigma = std::sqrt(std::max(p.variance, 0.0));
    const double score = acq.kind == AcquisitionKind::ProbabilityOfImprovement
                             ? acquisition_pi(p.mean, sigma, f_max, acq.xi)
                             : acquisition_ei(p.mean, sigma, f_max, acq.xi);
    if (score > best_score) {
      best_score = score;
      best_index = i;
    }
  }
  return pool[best_index];
}

namespace {

void feed_basis(reduce::ReducedBasis& basis, const Matrix& snapshot, int splits) {
  const Eigen::Index cols = snapshot.cols();
  const Eigen::Index per = std::max<Eigen::Index>(1, (cols + splits - 1) / splits);
  for (Eigen::Index start = 0; start < cols; start += per)
    basis.update(snapshot.middleCols(start, std::min(per, cols - start)));
}

std::vector<Matrix> test_values(const std::vector<hfm::SnapshotMatrix>& snapshots) {
  std::vector<Matrix> values;
  values.reserve(snapshots.size());
  for (const auto& s : snapshots) values.push_back(s.values);
  return values;
}

void relabel(std::vector<LabeledSample>& labels,
             const std::vector<hfm::SnapshotMatrix>& snapshots, const Matrix& basis) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i].error = reduce::reconstruction_error(snapshots[i].values, basis);
}

}  // namespace

BoResult run_bo(const BoRunConfig& config, const ParameterSpace& space,
                const HfmCallback& hfm_solve) {
  if (!(config.eps_tol > 0.0)) throw ConfigError("run_bo: eps_tol must be > 0");
  if (config.max_iterations < config.initial_count)
    throw ConfigError("run_bo: max_iterations must be >= initial count");
  if (config.initial_count < 2) throw ConfigError("run_bo: need at least 2 initial points");
  if (config.testing_count < 1) throw ConfigError("run_bo: need at least 1 testing point");

  using clock = std::chrono::steady_clock;
  BoResult result;
  result.basis = reduce::ReducedBasis(config.eps_svd);

  result.testing = lhs_sample(space, config.testing_count, derive_seed(config.seed, "testing"));
  result.training = lhs_sample(space, config.initial_count, derive_seed(config.seed, "initial"));

  for (const auto& theta : result.testing) result.testing_snapshots.push_back(hfm_solve(theta));
  const auto test_mats = test_values(result.testing_snapshots);

  const auto t0 = clock::now();
  for (const auto& theta : result.training) {
    result.training_snapshots.push_back(hfm_solve(theta));
    feed_basis(result.basis, result.training_snapshots.back().values, config.batch_splits);
    result.labels.push_back({theta, 0.0});
  }
  relabel(result.labels, result.training_snapshots, result.basis.basis());

  double eps_s = reduce::mean_test_error(test_mats, result.basis.basis());
  result.trace.push_back({static_cast<int>(result.training.size()), result.training.back(),
                          eps_s, result.basis.rank(),
                          std::chrono::duration<double>(clock::now() - t0).count()});

  while (eps_s >= config.eps_tol) {
    if (static_cast<int>(result.training.size()) >= config.max_iterations) {
      result.converged = false;
      return result;
    }
    const auto it0 = clock::now();
    const int j = static_cast<int>(result.training.size());

    std::vector<Vector> inputs;
    std::vector<double> targets;
    inputs.reserve(result.labels.size());
    for (const auto& l : result.labels) {
      inputs.push_back(l.theta.coeffs());
      targets.push_back(l.error);
    }
    const auto model = gpr::GprModel::fit(inputs, targets, config.kernel,
                                          derive_seed(config.seed, "fit-" + std::to_string(j)));

    const ParameterVector next =
        propose_next(model, config.acquisition, space,
                     derive_seed(config.seed, "pool-" + std::to_string(j)));

    result.training.push_back(next);
    result.training_snapshots.push_back(hfm_solve(next));
    feed_basis(result.basis, result.training_snapshots.back().values, config.batch_splits);
    result.labels.push_back({next, 0.0});
    relabel(result.labels, result.training_snapshots, result.basis.basis());

    eps_s = reduce::mean_test_error(test_mats, result.basis.basis());
    result.trace.push_back({static_cast<int>(result.training.size()), next, eps_s,
                            result.basis.rank(),
                            std::chrono::duration<double>(clock::now() - it0).count()});
  }
  result.converged = true;
  return result;
}

BoResult run_lhs(const BoRunConfig& config, const ParameterSpace& space, int count,
                 const HfmCallback& hfm_solve) {
  if (count < 1) throw ConfigError("run_lhs: count must be >= 1");
  using clock = std::chrono::steady_clock;
  BoResult result;
  result.basis = reduce::ReducedBasis(config.eps_svd);

  result.testing = lhs_sample(space, config.testing_count, derive_seed(config.seed, "testing"));
  for (const auto& theta : result.testing) result.testing_snapshots.push_back(hfm_solve(theta));
  const auto test_mats = test_values(result.testing_snapshots);

  result.training = lhs_sample(space, count, derive_seed(config.seed, "lhs-training"));
  const auto t0 = clock::now();
  for (const auto& theta : result.training) {
    result.training_snapshots.push_back(hfm_solve(theta));
    feed_basis(result.basis, result.training_snapshots.back().values, config.batch_splits);
    result.labels.push_back({theta, 0.0});
  }
  relabel(result.labels, result.training_snapshots, result.basis.basis());
  const double eps_s = reduce::mean_test_error(test_mats, result.basis.basis());
  result.trace.push_back({count, result.training.back(), eps_s, result.basis.rank(),
                          std::chrono::duration<double>(clock::now() - t0).count()});
  result.converged = eps_s < config.eps_tol;
  return result;
}

}  // namespace waverom::bo
