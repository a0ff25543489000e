#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "waverom/hfm.hpp"

using namespace waverom;
using namespace waverom::hfm;

TEST_CASE("temperature corrections") {
  SUBCASE("zero temperature leaves properties unchanged") {
    const auto m = derive_material(ParameterVector::material(68.9, 0.33, 2700.0, 0.0));
    CHECK(m.young == 68.9);
    CHECK(m.poisson == 0.33);
    CHECK(m.density == 2700.0);
  }
  SUBCASE("corrections at 25 degC") {
    const auto m = derive_material(ParameterVector::material(68.9, 0.33, 2700.0, 25.0));
    CHECK(m.young == doctest::Approx(68.2425).epsilon(1e-12));
    CHECK(m.poisson == doctest::Approx(0.405).epsilon(1e-12));
    CHECK(m.density == doctest::Approx(2695.4).epsilon(1e-12));
  }
  SUBCASE("distribution means give a physical material") {
    const auto space = ParameterSpace::aluminum_plate();
    Vector means(4);
    for (int i = 0; i < 4; ++i) means[i] = space.feature(i).mean;
    const auto m = derive_material(ParameterVector(means));
    CHECK(m.young > 0.0);
    CHECK(m.density > 0.0);
    CHECK(m.poisson > 0.0);
    CHECK(m.poisson < 0.5);
  }
  SUBCASE("corrected poisson ratio past one half is rejected") {
    CHECK_THROWS_AS(derive_material(ParameterVector::material(68.9, 0.358, 2700.0, 49.0)),
                    ConfigError);
    CHECK_FALSE(material_valid(ParameterVector::material(68.9, 0.358, 2700.0, 49.0)));
    CHECK(material_valid(ParameterVector::material(68.9, 0.33, 2700.0, 25.0)));
  }
}

TEST_CASE("tone burst window") {
  const double f = 250e3;
  CHECK(tone_burst(f, 5, 0.0) == 0.0);
  CHECK(tone_burst(f, 5, 5.0 / f) == doctest::Approx(0.0).epsilon(1e-9));
  // envelope = 1, carrier sin(5 pi) = 0 at the window midpoint
  CHECK(std::abs(tone_burst(f, 5, 2.5 / f)) < 1e-9);
  CHECK(tone_burst(f, 5, 6.0 / f) == 0.0);   // past the window
  CHECK(tone_burst(f, 5, 1.3 / f) > 0.0);    // inside the window, rising carrier
  CHECK_THROWS_AS(tone_burst(-1.0, 5, 0.0), ConfigError);
  CHECK_THROWS_AS(tone_burst(f, 0, 0.0), ConfigError);
}

namespace {

GridConfig small_grid() {
  GridConfig g;
  g.nx = 32;
  g.ny = 32;
  g.dx = 2e-3;
  return g;
}

TimeConfig short_time() {
  TimeConfig t;
  t.t_d = 2e-5;
  t.dt = 5e-8;
  t.keep_every = 10;
  return t;
}

const ParameterVector kThetaMean = ParameterVector::material(68.9, 0.33, 2700.0, 25.0);

}  // namespace

TEST_CASE("simulate basics") {
  const auto grid = small_grid();
  const auto time = short_time();
  ToneBurstSource src;
  src.i = 10;
  src.j = 12;

  SUBCASE("zero-amplitude source gives an all-zero snapshot matrix") {
    ToneBurstSource silent = src;
    silent.amplitude = 0.0;
    const auto s = simulate(kThetaMean, grid, time, silent);
    CHECK(s.values.rows() == grid.node_count());
    CHECK(s.values.cols() == time.retained());
    CHECK(s.values.norm() == 0.0);
  }

  SUBCASE("deterministic: two runs produce bit-identical matrices") {
    const auto a = simulate(kThetaMean, grid, time, src);
    const auto b = simulate(kThetaMean, grid, time, src);
    CHECK((a.values - b.values).norm() == 0.0);
    CHECK(a.times == b.times);
  }

  SUBCASE("linearity in the source amplitude") {
    const auto a = simulate(kThetaMean, grid, time, src);
    ToneBurstSource scaled = src;
    scaled.amplitude = 3.7;
    const auto b = simulate(kThetaMean, grid, time, scaled);
    CHECK((b.values - 3.7 * a.values).norm() <= 1e-12 * b.values.norm());
  }

  SUBCASE("CFL violation is rejected before stepping") {
    TimeConfig bad = time;
    bad.dt = 1e-6;  // c*dt*sqrt(2) ~ 7.5e-3 > dx = 2e-3
    CHECK_THROWS_AS(simulate(kThetaMean, grid, bad, src), ConfigError);
  }

  SUBCASE("source outside the grid is rejected") {
    ToneBurstSource outside = src;
    outside.i = grid.nx;
    CHECK_THROWS_AS(simulate(kThetaMean, grid, time, outside), ConfigError);
  }
}

TEST_CASE("simulate: energy bounded and dt-refinement agreement") {
  const auto grid = small_grid();
  const auto time = short_time();
  ToneBurstSource src;
  src.i = 10;
  src.j = 12;

  const auto coarse = simulate(kThetaMean, grid, time, src);

  // Energy rises during excitation and stays bounded afterwards.
  Vector energy(coarse.values.cols());
  for (Eigen::Index c = 0; c < coarse.values.cols(); ++c)
    energy[c] = coarse.values.col(c).squaredNorm();
  CHECK(energy[0] == 0.0);
  CHECK(energy.maxCoeff() > 0.0);
  CHECK(energy[coarse.values.cols() - 1] <= 3.0 * energy.maxCoeff());

  // Halving dt (same retained times) changes the matrix by < 1% Frobenius.
  TimeConfig fine = time;
  fine.dt = time.dt / 2.0;
  fine.keep_every = time.keep_every * 2;
  const auto refined = simulate(kThetaMean, grid, fine, src);
  REQUIRE(refined.values.cols() == coarse.values.cols());
  for (Eigen::Index c = 0; c < coarse.values.cols(); ++c)
    CHECK(refined.times[c] == doctest::Approx(coarse.times[c]).epsilon(1e-12));
  const double rel = (refined.values - coarse.values).norm() / coarse.values.norm();
  CHECK(rel < 0.01);
}

TEST_CASE("snapshot save/load round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "waverom_hfm_test";
  std::filesystem::create_directories(dir);
  const auto grid = small_grid();
  const auto time = short_time();
  ToneBurstSource src;
  src.i = 10;
  src.j = 12;
  const auto s = simulate(kThetaMean, grid, time, src);
  save_snapshot(dir / "snap.roms", s, kThetaMean, grid, time, "deadbeef");
  const auto back = load_snapshot(dir / "snap.roms");
  CHECK((back.values - s.values).norm() == 0.0);
  REQUIRE(back.times.size() == s.times.size());
  for (std::size_t i = 0; i < s.times.size(); ++i)
    CHECK(back.times[i] == doctest::Approx(s.times[i]).epsilon(1e-12));
  auto kv = io::read_kv(dir / "snap.roms.meta");
  CHECK(kv.at("config_hash") == "deadbeef");
  std::filesystem::remove_all(dir);
}
