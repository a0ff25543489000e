#ifndef WAVEROM_RNG_HPP
#define WAVEROM_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace waverom {

/// Expand a root seed into an independent per-stage seed. Labels give each
/// pipeline stage its own reproducible stream ("bo", "testing", "uq", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

/// Deterministic random source. All distribution mappings are implemented
/// here from raw mt19937_64 output so draws are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal via inverse-CDF transform.
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// In-place Fisher-Yates shuffle of [0, n) index vector.
  std::vector<int> permutation(int n);

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Standard normal pdf.
double norm_pdf(double x);
/// Standard normal cdf.
double norm_cdf(double x);
/// Standard normal quantile (inverse cdf), p in (0, 1). Accurate to ~1e-15
/// via a rational initial guess plus one Halley refinement.
double norm_quantile(double p);

/// Digitally-shifted Sobol' low-discrepancy sequence. Supports up to
/// max_dimensions() dimensions from an embedded direction-number table;
/// the shift is derived from the seed and preserves dyadic equidistribution,
/// so the first 2^k points still place exactly one point in each length-2^-k
/// dyadic interval per dimension.
class SobolSequence {
 public:
  SobolSequence(int dim, std::uint64_t seed);

  static int max_dimensions();

  /// Fill `point` (size dim) with the next point in (0, 1)^dim.
  void next(std::span<double> point);
  /// Skip ahead without producing output.
  void skip(std::uint64_t count);

  int dim() const { return dim_; }

 private:
  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> state_;       // dim Gray-code accumulators
  std::vector<std::uint32_t> shift_;       // per-dimension digital shift
  std::vector<std::uint32_t> direction_;   // dim x 32 direction numbers
};

}  // namespace waverom

#endif
