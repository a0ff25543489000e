#include "waverom/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace waverom {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  std::uint64_t x = root ^ 0xa0761d6478bd642fULL;
  splitmix64(x);
  for (unsigned char c : label) {
    x ^= static_cast<std::uint64_t>(c);
    splitmix64(x);
  }
  std::uint64_t out = x;
  return splitmix64(out);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  // uniform01 can return exactly 0; shift into (0, 1).
  double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  return norm_quantile(u);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // Rejection sampling for an unbiased result.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

std::vector<int> Rng::permutation(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

double norm_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norm_quantile: p outside (0,1)");

  // Acklam's rational approximation, then one Halley step against norm_cdf.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  double e = norm_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

// Primitive polynomial exponents (Joe-Kuo encoding: degree s, coefficient
// word a) and initial direction values m_k for dimensions 2..13. Dimension 1
// is the van der Corput sequence (all m_k = 1).
struct SobolDim {
  int s;
  std::uint32_t a;
  std::uint32_t m[6];
};

const SobolDim kSobolTable[] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
};

constexpr int kSobolBits = 32;

}  // namespace

int SobolSequence::max_dimensions() {
  return 1 + static_cast<int>(sizeof(kSobolTable) / sizeof(kSobolTable[0]));
}

SobolSequence::SobolSequence(int dim, std::uint64_t seed) : dim_(dim) {
  if (dim < 1 || dim > max_dimensions())
    throw std::invalid_argument("SobolSequence: unsupported dimension");
  direction_.assign(static_cast<std::size_t>(dim) * kSobolBits, 0);
  state_.assign(dim, 0);
  shift_.assign(dim, 0);

  for (int d = 0; d < dim; ++d) {
    std::uint32_t* v = &direction_[static_cast<std::size_t>(d) * kSobolBits];
    if (d == 0) {
      for (int k = 0; k < kSobolBits; ++k) v[k] = 1u << (31 - k);
      continue;
    }
    const SobolDim& row = kSobolTable[d - 1];
    std::uint32_t m[kSobolBits];
    for (int k = 0; k < row.s; ++k) m[k] = row.m[k];
    for (int k = row.s; k < kSobolBits; ++k) {
      std::uint32_t value = m[k - row.s] ^ (m[k - row.s] << row.s);
      for (int j = 1; j < row.s; ++j) {
        if ((row.a >> (row.s - 1 - j)) & 1u) value ^= m[k - j] << j;
      }
      m[k] = value;
    }
    for (int k = 0; k < kSobolBits; ++k) v[k] = m[k] << (31 - k);
  }

  std::uint64_t s = seed;
  for (int d = 0; d < dim; ++d) {
    shift_[d] = static_cast<std::uint32_t>(splitmix64(s) >> 32);
    state_[d] = shift_[d];
  }
}

void SobolSequence::next(std::span<double> point) {
  if (static_cast<int>(point.size()) != dim_)
    throw std::invalid_argument("SobolSequence::next: size mismatch");
  // Gray-code update: flip the direction number of the lowest zero bit of
  // the previous index.
  if (index_ > 0) {
    std::uint64_t c = index_ - 1;
    int bit = 0;
    while (c & 1u) {
      c >>= 1;
      ++bit;
    }
    for (int d = 0; d < dim_; ++d)
      state_[d] ^= direction_[static_cast<std::size_t>(d) * kSobolBits + bit];
  }
  for (int d = 0; d < dim_; ++d) {
    double u = static_cast<double>(state_[d]) * 0x1.0p-32;
    // Keep strictly inside (0, 1) so inverse-CDF mappings stay finite.
    point[d] = std::min(std::max(u, 0x1.0p-53), 1.0 - 0x1.0p-53);
  }
  ++index_;
}

void SobolSequence::skip(std::uint64_t count) {
  std::vector<double> scratch(dim_);
  for (std::uint64_t i = 0; i < count; ++i) next(scratch);
}

}  // namespace waverom
