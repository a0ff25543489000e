#ifndef WAVEROM_COMMON_HPP
#define WAVEROM_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace waverom {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Invalid configuration or parameters, detected before any compute. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure during compute (divergence, conditioning, undefined
/// normalization). CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// File format / filesystem failure. CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace waverom

#endif
