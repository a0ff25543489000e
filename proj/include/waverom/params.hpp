#ifndef WAVEROM_PARAMS_HPP
#define WAVEROM_PARAMS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "waverom/common.hpp"

namespace waverom {

/// One sample point in parameter space. The reference problem uses
/// xi = 4 features [E (GPa), nu (-), rho (kg/m^3), T (degC)], but any
/// dimension >= 1 is supported for the regression/sampling machinery.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(Vector values) : values_(std::move(values)) {}
  static ParameterVector material(double young, double poisson, double density,
                                  double temperature);

  int dim() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }
  double& operator[](int i) { return values_[i]; }
  const Vector& coeffs() const { return values_; }

  // Named accessors for the 4-feature material problem.
  double young() const { return at4(0); }
  double poisson() const { return at4(1); }
  double density() const { return at4(2); }
  double temperature() const { return at4(3); }

 private:
  double at4(int i) const;
  Vector values_;
};

struct FeatureDistribution {
  std::string name;
  double mean = 0.0;
  double stddev = 1.0;
};

/// Independent per-feature Gaussians; feasible box is mean +/- 4*stddev
/// per feature (captures 99.99% of the distribution mass).
class ParameterSpace {
 public:
  ParameterSpace() = default;
  explicit ParameterSpace(std::vector<FeatureDistribution> features);

  /// Reference material/temperature distributions for the aluminum plate
  /// problem: E ~ N(68.9, 1.332^2) GPa, nu ~ N(0.33, 0.007^2),
  /// rho ~ N(2700, 2.7^2) kg/m^3, T ~ N(25, 6^2) degC.
  static ParameterSpace aluminum_plate();

  int dim() const { return static_cast<int>(features_.size()); }
  const FeatureDistribution& feature(int i) const { return features_[i]; }
  double lower(int i) const { return features_[i].mean - 4.0 * features_[i].stddev; }
  double upper(int i) const { return features_[i].mean + 4.0 * features_[i].stddev; }
  bool contains(const ParameterVector& theta) const;

 private:
  std::vector<FeatureDistribution> features_;
};

/// Temperature-corrected material properties.
struct EffectiveMaterial {
  double young;    // GPa
  double poisson;  // -
  double density;  // kg/m^3

  /// Plate wave speed c = sqrt(E / (rho (1 - nu^2))), E converted to Pa.
  double wave_speed() const;
};

/// Apply the linear temperature corrections
///   E^t = E - 0.0263 T,  nu^t = nu + 0.003 T,  rho^t = rho - 0.184 T.
/// Throws ConfigError if the corrected material is unphysical
/// (E <= 0, rho <= 0, or nu outside (0, 0.5)).
EffectiveMaterial derive_material(const ParameterVector& theta);

/// True when derive_material would accept theta. Used by samplers to keep
/// proposals inside the feasible set; vectors with dim != 4 are always valid.
bool material_valid(const ParameterVector& theta);

}  // namespace waverom

#endif
