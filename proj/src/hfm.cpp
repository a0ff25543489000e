#include "waverom/hfm.hpp"

#include <cmath>
#include <string>

namespace waverom::hfm {

void GridConfig::validate() const {
  if (nx < 8 || ny < 8) throw ConfigError("grid: nx, ny must be >= 8");
  if (!(dx > 0.0)) throw ConfigError("grid: dx must be positive");
  if (!(thickness > 0.0)) throw ConfigError("grid: thickness must be positive");
}

void TimeConfig::validate() const {
  if (!(t_d > 0.0) || !(dt > 0.0)) throw ConfigError("time: t_d and dt must be positive");
  if (keep_every < 1) throw ConfigError("time: keep_every must be >= 1");
  if (steps() < keep_every) throw ConfigError("time: window shorter than one retained step");
}

double tone_burst(double center_frequency, int peaks, double t) {
  if (!(center_frequency > 0.0)) throw ConfigError("tone_burst: center frequency must be > 0");
  if (peaks < 1) throw ConfigError("tone_burst: peaks must be >= 1");
  const double duration = static_cast<double>(peaks) / center_frequency;
  if (t < 0.0 || t > duration) return 0.0;
  const double phase = 2.0 * M_PI * center_frequency * t;
  return 0.5 * (1.0 - std::cos(phase / peaks)) * std::sin(phase);
}

SnapshotMatrix simulate(const ParameterVector& theta, const GridConfig& grid,
                        const TimeConfig& time, const ToneBurstSource& source) {
  grid.validate();
  time.validate();
  const EffectiveMaterial mat = derive_material(theta);
  const double c = mat.wave_speed();

  if (c * time.dt * M_SQRT2 > grid.dx * (1.0 + 1e-12)) {
    throw ConfigError("CFL violation: c*dt*sqrt(2) = " + std::to_string(c * time.dt * M_SQRT2) +
                      " exceeds dx = " + std::to_string(grid.dx));
  }
  if (source.i < 0 || source.i >= grid.nx || source.j < 0 || source.j >= grid.ny)
    throw ConfigError("source location outside grid");

  const int nx = grid.nx, ny = grid.ny, n = grid.node_count();
  const int steps = time.steps();
  const int n_t = time.retained();
  const double dt2 = time.dt * time.dt;
  const double c2_inv_dx2 = c * c / (grid.dx * grid.dx);
  const double source_scale = source.amplitude / (mat.density * grid.thickness);
  const int src = source.i + nx * source.j;

  // Per-node neighbor indices with free-edge mirroring; fixed edges are
  // pinned to zero each step.
  std::vector<int> left(n), right(n), down(n), up(n);
  std::vector<char> fixed(n, 0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int id = i + nx * j;
      left[id] = (i > 0 ? id - 1 : id + 1);
      right[id] = (i < nx - 1 ? id + 1 : id - 1);
      down[id] = (j > 0 ? id - nx : id + nx);
      up[id] = (j < ny - 1 ? id + nx : id - nx);
      if ((grid.fixed_edges[0] && i == 0) || (grid.fixed_edges[1] && j == 0) ||
          (grid.fixed_edges[2] && i == nx - 1) || (grid.fixed_edges[3] && j == ny - 1))
        fixed[id] = 1;
    }
  }

  SnapshotMatrix out;
  out.values.resize(n, n_t);
  out.times.resize(n_t);

  std::vector<double> u_prev(n, 0.0), u_cur(n, 0.0), u_next(n, 0.0);
  for (int step = 0; step < steps; ++step) {
    const double t = step * time.dt;
    const double s = tone_burst(source.center_frequency, source.peaks, t) * source_scale;
    for (int id = 0; id < n; ++id) {
      if (fixed[id]) {
        u_next[id] = 0.0;
        continue;
      }
      const double lap = u_cur[left[id]] + u_cur[right[id]] + u_cur[down[id]] +
                         u_cur[up[id]] - 4.0 * u_cur[id];
      u_next[id] = 2.0 * u_cur[id] - u_prev[id] + dt2 * c2_inv_dx2 * lap;
    }
    if (!fixed[src]) u_next[src] += dt2 * s;

    if (step % time.keep_every == 0) {
      const int col = step / time.keep_every;
      if (col < n_t) {
        double* dst = out.values.col(col).data();
        bool finite = true;
        for (int id = 0; id < n; ++id) {
          const double acc = (u_next[id] - 2.0 * u_cur[id] + u_prev[id]) / dt2;
          dst[id] = acc;
          finite = finite && std::isfinite(acc);
        }
        if (!finite)
          throw NumericError("wave solve diverged at step " + std::to_string(step));
        out.times[col] = t;
      }
    }
    std::swap(u_prev, u_cur);
    std::swap(u_cur, u_next);
  }
  return out;
}

void save_snapshot(const std::filesystem::path& path, const SnapshotMatrix& snapshot,
                   const ParameterVector& theta, const GridConfig& grid,
                   const TimeConfig& time, const std::string& config_hash) {
  io::write_array(path, snapshot.values);
  io::KvPairs kv;
  kv.emplace_back("kind", "snapshot");
  kv.emplace_back("config_hash", config_hash);
  kv.emplace_back("dim", std::to_string(theta.dim()));
  for (int i = 0; i < theta.dim(); ++i)
    kv.emplace_back("theta_" + std::to_string(i), io::format_double(theta[i]));
  kv.emplace_back("nx", std::to_string(grid.nx));
  kv.emplace_back("ny", std::to_string(grid.ny));
  kv.emplace_back("dx", io::format_double(grid.dx));
  kv.emplace_back("t_d", io::format_double(time.t_d));
  kv.emplace_back("dt", io::format_double(time.dt));
  kv.emplace_back("keep_every", std::to_string(time.keep_every));
  io::write_kv(path.string() + ".meta", kv);
}

SnapshotMatrix load_snapshot(const std::filesystem::path& path) {
  SnapshotMatrix s;
  s.values = io::read_array(path);
  s.times.assign(static_cast<std::size_t>(s.values.cols()), 0.0);
  const auto meta_path = path.string() + ".meta";
  if (std::filesystem::exists(meta_path)) {
    auto kv = io::read_kv(meta_path);
    const double dt = io::parse_double(io::require(kv, "dt", meta_path), "dt");
    const long keep = io::parse_long(io::require(kv, "keep_every", meta_path), "keep_every");
    for (Eigen::Index j = 0; j < s.values.cols(); ++j)
      s.times[static_cast<std::size_t>(j)] = static_cast<double>(j) * keep * dt;
  }
  return s;
}

}  // namespace waverom::hfm
