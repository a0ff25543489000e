#ifndef WAVEROM_GPR_HPP
#define WAVEROM_GPR_HPP

#include <Eigen/Cholesky>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "waverom/common.hpp"

namespace waverom::gpr {

enum class KernelKind { Rbf, Matern15, Product };

KernelKind kernel_kind_from_string(const std::string& name);
std::string to_string(KernelKind kind);

/// Kernel hyperparameters. The product kernel multiplies an rbf factor
/// (length_scale, variance) with a Matern-1.5 factor (length_scale_2,
/// variance_2); the single kernels use only the first pair.
struct KernelConfig {
  KernelKind kind = KernelKind::Rbf;
  double length_scale = 1.0;
  double variance = 1.0;
  double length_scale_2 = 1.0;
  double variance_2 = 1.0;
  double noise = 1e-10;  // observation jitter sigma_n^2
  /// The rbf exponent uses the literal denominator 2*l. Set true for the
  /// conventional 2*l^2 form instead.
  bool squared_length_scale = false;

  // log-space fit bounds, shared by all length scales / variances
  double length_min = 1e-2, length_max = 1e3;
  double variance_min = 1e-6, variance_max = 1e3;
};

/// Squared-exponential kernel sigma2 * exp(-d^2 / (2 l))  (or 2 l^2 with
/// the squared flag).
double kernel_rbf(const Vector& a, const Vector& b, double length_scale, double variance,
                  bool squared_length_scale = false);

/// Matern kernel at smoothness 1.5: sigma2 (1 + sqrt(3) d / l) exp(-sqrt(3) d / l).
double kernel_matern15(const Vector& a, const Vector& b, double length_scale, double variance);

/// Kernel value under a config (dispatches on kind; Product multiplies the
/// two factors pointwise).
double kernel_value(const KernelConfig& config, const Vector& a, const Vector& b);

/// Gaussian process regression over (parameter vector -> scalar) pairs.
/// Inputs are standardized per-feature and targets to zero mean / unit
/// variance with training statistics stored in the model; hyperparameters
/// are fitted by multi-start maximum likelihood.
class GprModel {
 public:
  struct Posterior {
    double mean;
    double variance;
  };

  /// Fit hyperparameters by maximizing the log marginal likelihood with
  /// 8 seeded Nelder-Mead restarts over log-space hyperparameters.
  /// Throws ConfigError for fewer than 2 training points and NumericError
  /// when the covariance cannot be factorized after jitter escalation.
  static GprModel fit(const std::vector<Vector>& inputs, const std::vector<double>& targets,
                      const KernelConfig& config, std::uint64_t seed);

  /// Posterior in raw target units.
  Posterior posterior(const Vector& x) const;
  /// Posterior in standardized target units (zero prior mean).
  Posterior posterior_standardized(const Vector& x) const;

  double log_marginal_likelihood() const { return lml_; }
  const KernelConfig& kernel() const { return config_; }
  double prior_mean() const { return target_mean_; }
  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  int training_count() const { return static_cast<int>(targets_.size()); }
  /// Largest training target on the standardized scale (the acquisition
  /// incumbent f_max).
  double max_target_standardized() const { return targets_.maxCoeff(); }

  /// Log marginal likelihood of standardized data at given hyperparameters;
  /// exposed for the fit-improves-likelihood property.
  double lml_at(const KernelConfig& config) const;

  void save(const std::filesystem::path& path) const;
  static GprModel load(const std::filesystem::path& path);

 private:
  GprModel() = default;
  void standardize_fit(const std::vector<Vector>& inputs, const std::vector<double>& targets);
  Vector standardized(const Vector& x) const;
  Matrix gram(const KernelConfig& config) const;
  void factorize(const KernelConfig& config);

  KernelConfig config_;
  Matrix inputs_std_;        // tau x xi
  Vector targets_;           // standardized, tau
  Vector feat_mean_, feat_std_;
  double target_mean_ = 0.0, target_std_ = 1.0;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;             // K^{-1} y (standardized)
  double jitter_used_ = 0.0;
  double lml_ = 0.0;
};

}  // namespace waverom::gpr

#endif
