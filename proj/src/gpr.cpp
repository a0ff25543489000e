#include "waverom/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "waverom/io.hpp"
#include "waverom/rng.hpp"

namespace waverom::gpr {

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "rbf") return KernelKind::Rbf;
  if (name == "matern15") return KernelKind::Matern15;
  if (name == "product") return KernelKind::Product;
  throw ConfigError("unknown kernel '" + name + "' (expected rbf|matern15|product)");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Matern15: return "matern15";
    case KernelKind::Product: return "product";
  }
  return "?";
}

double kernel_rbf(const Vector& a, const Vector& b, double length_scale, double variance,
                  bool squared_length_scale) {
  if (!(length_scale > 0.0)) throw ConfigError("rbf kernel: length scale must be > 0");
  const double d2 = (a - b).squaredNorm();
  const double denom = squared_length_scale ? 2.0 * length_scale * length_scale
                                            : 2.0 * length_scale;
  return variance * std::exp(-d2 / denom);
}

double kernel_matern15(const Vector& a, const Vector& b, double length_scale, double variance) {
  if (!(length_scale > 0.0)) throw ConfigError("matern kernel: length scale must be > 0");
  const double z = std::sqrt(3.0) * (a - b).norm() / length_scale;
  return variance * (1.0 + z) * std::exp(-z);
}

double kernel_value(const KernelConfig& config, const Vector& a, const Vector& b) {
  switch (config.kind) {
    case KernelKind::Rbf:
      return kernel_rbf(a, b, config.length_scale, config.variance, config.squared_length_scale);
    case KernelKind::Matern15:
      return kernel_matern15(a, b, config.length_scale, config.variance);
    case KernelKind::Product:
      return kernel_rbf(a, b, config.length_scale, config.variance, config.squared_length_scale) *
             kernel_matern15(a, b, config.length_scale_2, config.variance_2);
  }
  throw ConfigError("unknown kernel kind");
}

namespace {

int hyper_count(KernelKind kind) { return kind == KernelKind::Product ? 4 : 2; }

void apply_hypers(KernelConfig& config, const Vector& log_params) {
  config.length_scale = std::exp(log_params[0]);
  config.variance = std::exp(log_params[1]);
  if (config.kind == KernelKind::Product) {
    config.length_scale_2 = std::exp(log_params[2]);
    config.variance_2 = std::exp(log_params[3]);
  }
}

Vector extract_hypers(const KernelConfig& config) {
  Vector v(hyper_count(config.kind));
  v[0] = std::log(config.length_scale);
  v[1] = std::log(config.variance);
  if (config.kind == KernelKind::Product) {
    v[2] = std::log(config.length_scale_2);
    v[3] = std::log(config.variance_2);
  }
  return v;
}

// Nelder-Mead minimization, deterministic for a fixed start simplex.
Vector nelder_mead(const std::function<double(const Vector&)>& objective, Vector start,
                   int max_iters) {
  const int n = static_cast<int>(start.size());
  std::vector<Vector> simplex(n + 1, start);
  std::vector<double> value(n + 1);
  for (int i = 0; i < n; ++i) simplex[i + 1][i] += 0.25;
  for (int i = 0; i <= n; ++i) value[i] = objective(simplex[i]);

  auto order = [&] {
    for (int i = 1; i <= n; ++i) {
      for (int j = i; j > 0 && value[j] < value[j - 1]; --j) {
        std::swap(value[j], value[j - 1]);
        std::swap(simplex[j], simplex[j - 1]);
      }
    }
  };
  order();

  for (int iter = 0; iter < max_iters; ++iter) {
    if (std::abs(value[n] - value[0]) < 1e-10 * (1.0 + std::abs(value[0]))) break;
    Vector centroid = Vector::Zero(n);
    for (int i = 0; i < n; ++i) centroid += simplex[i];
    centroid /= n;

    Vector reflected = centroid + (centroid - simplex[n]);
    double fr = objective(reflected);
    if (fr < value[0]) {
      Vector expanded = centroid + 2.0 * (centroid - simplex[n]);
      double fe = objective(expanded);
      if (fe < fr) {
        simplex[n] = expanded;
        value[n] = fe;
      } else {
        simplex[n] = reflected;
        value[n] = fr;
      }
    } else if (fr < value[n - 1]) {
      simplex[n] = reflected;
      value[n] = fr;
    } else {
      Vector contracted = centroid + 0.5 * (simplex[n] - centroid);
      double fc = objective(contracted);
      if (fc < value[n]) {
        simplex[n] = contracted;
        value[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
          value[i] = objective(simplex[i]);
        }
      }
    }
    order();
  }
  return simplex[0];
}

}  // namespace

void GprModel::standardize_fit(const std::vector<Vector>& inputs,
                               const std::vector<double>& targets) {
  const int tau = static_cast<int>(inputs.size());
  const int xi = static_cast<int>(inputs[0].size());
  feat_mean_ = Vector::Zero(xi);
  feat_std_ = Vector::Zero(xi);
  for (const auto& x : inputs) feat_mean_ += x;
  feat_mean_ /= tau;
  for (const auto& x : inputs) feat_std_ += (x - feat_mean_).cwiseAbs2();
  feat_std_ = (feat_std_ / tau).cwiseSqrt();
  for (int i = 0; i < xi; ++i)
    if (feat_std_[i] == 0.0) feat_std_[i] = 1.0;

  inputs_std_.resize(tau, xi);
  for (int i = 0; i < tau; ++i)
    inputs_std_.row(i) = ((inputs[i] - feat_mean_).array() / feat_std_.array()).transpose();

  target_mean_ = 0.0;
  for (double y : targets) target_mean_ += y;
  target_mean_ /= tau;
  double var = 0.0;
  for (double y : targets) var += (y - target_mean_) * (y - target_mean_);
  target_std_ = std::sqrt(var / tau);
  if (target_std_ == 0.0) target_std_ = 1.0;

  targets_.resize(tau);
  for (int i = 0; i < tau; ++i) targets_[i] = (targets[i] - target_mean_) / target_std_;
}

Vector GprModel::standardized(const Vector& x) const {
  if (x.size() != feat_mean_.size())
    throw ConfigError("gpr posterior: query dimension mismatch");
  return ((x - feat_mean_).array() / feat_std_.array()).matrix();
}

Matrix GprModel::gram(const KernelConfig& config) const {
  const int tau = static_cast<int>(inputs_std_.rows());
  Matrix k(tau, tau);
  for (int i = 0; i < tau; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = kernel_value(config, inputs_std_.row(i).transpose(), inputs_std_.row(j).transpose());
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double GprModel::lml_at(const KernelConfig& config) const {
  const int tau = static_cast<int>(inputs_std_.rows());
  Matrix k = gram(config);
  k.diagonal().array() += config.noise;
  for (double jitter = 1e-10; jitter <= 1.01e-6; jitter *= 10.0) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() != Eigen::Success) continue;
    Vector alpha = llt.solve(targets_);
    double log_det = 0.0;
    for (int i = 0; i < tau; ++i) log_det += std::log(llt.matrixL()(i, i));
    return -0.5 * targets_.dot(alpha) - log_det - 0.5 * tau * std::log(2.0 * M_PI);
  }
  return -std::numeric_limits<double>::infinity();
}

void GprModel::factorize(const KernelConfig& config) {
  const int tau = static_cast<int>(inputs_std_.rows());
  Matrix k = gram(config);
  k.diagonal().array() += config.noise;
  for (double jitter = 1e-10; jitter <= 1.01e-6; jitter *= 10.0) {
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(kj);
    if (llt.info() == Eigen::Success) {
      llt_ = llt;
      jitter_used_ = jitter;
      alpha_ = llt_.solve(targets_);
      double log_det = 0.0;
      for (int i = 0; i < tau; ++i) log_det += std::log(llt_.matrixL()(i, i));
      lml_ = -0.5 * targets_.dot(alpha_) - log_det - 0.5 * tau * std::log(2.0 * M_PI);
      return;
    }
  }
  throw NumericError("gpr covariance not positive definite after jitter escalation");
}

GprModel GprModel::fit(const std::vector<Vector>& inputs, const std::vector<double>& targets,
                       const KernelConfig& config, std::uint64_t seed) {
  if (inputs.size() < 2) throw ConfigError("gpr fit needs at least 2 training points");
  if (inputs.size() != targets.size()) throw ConfigError("gpr fit: inputs/targets count mismatch");
  for (const auto& x : inputs)
    if (x.size() != inputs[0].size()) throw ConfigError("gpr fit: ragged input dimensions");

  if (config.noise == 0.0) {
    for (std::size_t i = 0; i < inputs.size(); ++i)
      for (std::size_t j = i + 1; j < inputs.size(); ++j)
        if (inputs[i] == inputs[j])
          throw NumericError("gpr fit: duplicate training inputs with zero noise");
  }

  GprModel model;
  model.config_ = config;
  model.standardize_fit(inputs, targets);

  const int dim = hyper_count(config.kind);
  const double log_l_min = std::log(config.length_min), log_l_max = std::log(config.length_max);
  const double log_v_min = std::log(config.variance_min), log_v_max = std::log(config.variance_max);
  auto clamp_box = [&](Vector v) {
    for (int i = 0; i < dim; ++i) {
      const bool is_length = (i % 2 == 0);
      v[i] = std::clamp(v[i], is_length ? log_l_min : log_v_min,
                        is_length ? log_l_max : log_v_max);
    }
    return v;
  };

  auto objective = [&](const Vector& log_params) {
    KernelConfig c = config;
    apply_hypers(c, clamp_box(log_params));
    return -model.lml_at(c);
  };

  Rng rng(seed);
  Vector best = clamp_box(extract_hypers(config));
  double best_value = objective(best);
  const int restarts = 8;
  for (int r = 0; r < restarts; ++r) {
    Vector start(dim);
    if (r == 0) {
      start = best;
    } else {
      for (int i = 0; i < dim; ++i) {
        const bool is_length = (i % 2 == 0);
        start[i] = is_length ? rng.uniform(log_l_min, log_l_max)
                             : rng.uniform(log_v_min, log_v_max);
      }
    }
    Vector candidate = clamp_box(nelder_mead(objective, start, 200 * dim));
    double value = objective(candidate);
    if (value < best_value) {
      best_value = value;
      best = candidate;
    }
  }

  apply_hypers(model.config_, best);
  model.factorize(model.config_);
  return model;
}

GprModel::Posterior GprModel::posterior_standardized(const Vector& x) const {
  const Vector xs = standardized(x);
  const int tau = static_cast<int>(inputs_std_.rows());
  Vector k_star(tau);
  for (int i = 0; i < tau; ++i) k_star[i] = kernel_value(config_, inputs_std_.row(i).transpose(), xs);
  const double mean = k_star.dot(alpha_);
  const double prior_var = kernel_value(config_, xs, xs);
  const Vector v = llt_.matrixL().solve(k_star);
  double variance = prior_var - v.squaredNorm();
  if (variance < 0.0) {
    if (variance > -1e-12 * std::max(1.0, prior_var))
      variance = 0.0;
    else
      throw NumericError("gpr posterior variance negative beyond round-off: " +
                         std::to_string(variance));
  }
  return {mean, variance};
}

GprModel::Posterior GprModel::posterior(const Vector& x) const {
  Posterior p = posterior_standardized(x);
  return {target_mean_ + target_std_ * p.mean, target_std_ * target_std_ * p.variance};
}

void GprModel::save(const std::filesystem::path& path) const {
  io::KvPairs kv;
  kv.emplace_back("kind", "gpr");
  kv.emplace_back("kernel", to_string(config_.kind));
  kv.emplace_back("length_scale", io::format_double(config_.length_scale));
  kv.emplace_back("variance", io::format_double(config_.variance));
  kv.emplace_back("length_scale_2", io::format_double(config_.length_scale_2));
  kv.emplace_back("variance_2", io::format_double(config_.variance_2));
  kv.emplace_back("noise", io::format_double(config_.noise));
  kv.emplace_back("squared_length_scale", config_.squared_length_scale ? "1" : "0");
  kv.emplace_back("target_mean", io::format_double(target_mean_));
  kv.emplace_back("target_std", io::format_double(target_std_));
  io::write_kv(path, kv);
  io::write_array(path.string() + ".x", inputs_std_);
  io::write_array(path.string() + ".y", Matrix(targets_));
  io::write_array(path.string() + ".fm", Matrix(feat_mean_));
  io::write_array(path.string() + ".fs", Matrix(feat_std_));
}

GprModel GprModel::load(const std::filesystem::path& path) {
  auto kv = io::read_kv(path);
  const std::string file = path.string();
  GprModel model;
  model.config_.kind = kernel_kind_from_string(io::require(kv, "kernel", file));
  model.config_.length_scale = io::parse_double(io::require(kv, "length_scale", file), "length_scale");
  model.config_.variance = io::parse_double(io::require(kv, "variance", file), "variance");
  model.config_.length_scale_2 =
      io::parse_double(io::require(kv, "length_scale_2", file), "length_scale_2");
  model.config_.variance_2 = io::parse_double(io::require(kv, "variance_2", file), "variance_2");
  model.config_.noise = io::parse_double(io::require(kv, "noise", file), "noise");
  model.config_.squared_length_scale = io::require(kv, "squared_length_scale", file) == "1";
  model.target_mean_ = io::parse_double(io::require(kv, "target_mean", file), "target_mean");
  model.target_std_ = io::parse_double(io::require(kv, "target_std", file), "target_std");
  model.inputs_std_ = io::read_array(file + ".x");
  model.targets_ = io::read_array(file + ".y");
  model.feat_mean_ = io::read_array(file + ".fm");
  model.feat_std_ = io::read_array(file + ".fs");
  model.factorize(model.config_);
  return model;
}

}  // namespace waverom::gpr
