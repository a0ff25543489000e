#ifndef WAVEROM_HFM_HPP
#define WAVEROM_HFM_HPP

#include <array>
#include <filesystem>
#include <vector>

#include "waverom/io.hpp"
#include "waverom/params.hpp"

namespace waverom::hfm {

/// Regular 2D grid for the plate stand-in. Two adjacent edges (x = 0 and
/// y = 0 by default) are held fixed; the remaining edges are free.
struct GridConfig {
  int nx = 64;
  int ny = 64;
  double dx = 2e-3;          // node spacing (m)
  double thickness = 1.5e-3; // plate thickness surrogate; scales the source term
  // fixed edges: {x=0, y=0, x=nx-1, y=ny-1}
  std::array<bool, 4> fixed_edges = {true, true, false, false};

  int node_count() const { return nx * ny; }
  void validate() const;
};

/// Time discretization. The solver runs steps() explicit steps of size dt
/// and retains every keep_every-th acceleration field starting from step 1,
/// for exactly retained() = floor(steps/keep_every) columns.
struct TimeConfig {
  double t_d = 1e-4;   // total window (s)
  double dt = 1e-7;    // step (s)
  int keep_every = 5;  // subsampling factor

  int steps() const { return static_cast<int>(std::lround(t_d / dt)); }
  int retained() const { return steps() / keep_every; }
  void validate() const;
};

/// Tone-burst excitation injected at a single grid node.
struct ToneBurstSource {
  int i = 21;  // x index
  int j = 21;  // y index
  double center_frequency = 250e3;  // Hz
  int peaks = 5;
  double amplitude = 1.0;
};

/// Field samples over time for one parameter vector: node_count x retained
/// columns of the second time-difference (acceleration surrogate).
struct SnapshotMatrix {
  Matrix values;              // N_h x N_t
  std::vector<double> times;  // retained time stamps, size N_t

  Eigen::Index node_count() const { return values.rows(); }
  Eigen::Index retained() const { return values.cols(); }
};

/// Hann-windowed sine: 0.5 (1 - cos(2 pi f t / n)) sin(2 pi f t) on
/// [0, n/f], zero outside.
double tone_burst(double center_frequency, int peaks, double t);

/// Explicit central-difference solve of the 2D scalar wave equation
/// u_tt = c^2 laplacian(u) + s(t) delta_src with the plate wave speed
/// c^2 = E^t / (rho^t (1 - nu^t^2)). Throws ConfigError when the CFL bound
/// dt <= dx/(c sqrt(2)) is violated or the source lies outside the grid,
/// NumericError (with step index) if the field leaves the finite range.
SnapshotMatrix simulate(const ParameterVector& theta, const GridConfig& grid,
                        const TimeConfig& time, const ToneBurstSource& source);

/// Snapshot persistence: binary array file plus a key=value sidecar
/// (theta, grid, time configs, and the provenance hash) at path + ".meta".
void save_snapshot(const std::filesystem::path& path, const SnapshotMatrix& snapshot,
                   const ParameterVector& theta, const GridConfig& grid,
                   const TimeConfig& time, const std::string& config_hash);
SnapshotMatrix load_snapshot(const std::filesystem::path& path);

}  // namespace waverom::hfm

#endif
