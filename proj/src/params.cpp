#include "waverom/params.hpp"

#include <cmath>

namespace waverom {

namespace {
// Linear temperature-correction slopes for the aluminum plate.
constexpr double kYoungSlope = 0.0263;   // GPa per degC
constexpr double kPoissonSlope = 0.003;  // per degC
constexpr double kDensitySlope = 0.184;  // kg/m^3 per degC
}  // namespace

ParameterVector ParameterVector::material(double young, double poisson, double density,
                                          double temperature) {
  Vector v(4);
  v << young, poisson, density, temperature;
  return ParameterVector(v);
}

double ParameterVector::at4(int i) const {
  if (dim() != 4)
    throw ConfigError("material accessors require a 4-feature parameter vector, got dim=" +
                      std::to_string(dim()));
  return values_[i];
}

ParameterSpace::ParameterSpace(std::vector<FeatureDistribution> features)
    : features_(std::move(features)) {
  if (features_.empty()) throw ConfigError("parameter space needs at least one feature");
  for (const auto& f : features_) {
    if (!(f.stddev > 0.0))
      throw ConfigError("feature '" + f.name + "' needs a positive stddev");
  }
}

ParameterSpace ParameterSpace::aluminum_plate() {
  return ParameterSpace({{"E", 68.9, 1.332},
                         {"nu", 0.33, 0.007},
                         {"rho", 2700.0, 2.7},
                         {"T", 25.0, 6.0}});
}

bool ParameterSpace::contains(const ParameterVector& theta) const {
  if (theta.dim() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    if (theta[i] < lower(i) || theta[i] > upper(i)) return false;
  }
  return true;
}

double EffectiveMaterial::wave_speed() const {
  return std::sqrt(young * 1e9 / (density * (1.0 - poisson * poisson)));
}

EffectiveMaterial derive_material(const ParameterVector& theta) {
  const double t = theta.temperature();
  EffectiveMaterial m{theta.young() - kYoungSlope * t, theta.poisson() + kPoissonSlope * t,
                      theta.density() - kDensitySlope * t};
  if (!(m.young > 0.0) || !(m.density > 0.0) || !(m.poisson > 0.0) || !(m.poisson < 0.5)) {
    throw ConfigError("invalid material after temperature correction: E=" +
                      std::to_string(m.young) + " nu=" + std::to_string(m.poisson) +
                      " rho=" + std::to_string(m.density));
  }
  return m;
}

bool material_valid(const ParameterVector& theta) {
  if (theta.dim() != 4) return true;
  try {
    derive_material(theta);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

}  // namespace waverom
