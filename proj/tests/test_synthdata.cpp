#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "support.hpp"
#include "topoflow/synthdata.hpp"

using namespace topoflow;
using namespace topoflow::synth;

namespace {

TerrainWind uniform_wind(const GridSpec& s, double u, double v) {
  TerrainWind tw;
  tw.spec = s;
  tw.elevation.assign(s.cells(), 0.0f);
  tw.u.assign(s.cells(), static_cast<float>(u));
  tw.v.assign(s.cells(), static_cast<float>(v));
  return tw;
}

Field gaussian(const GridSpec& s, double r0, double c0, double sigma) {
  Field f(s, {"tracer"}, {"ug/m3"});
  for (int r = 0; r < s.height; ++r)
    for (int c = 0; c < s.width; ++c)
      f.at(0, r, c) = static_cast<float>(100.0 * std::exp(-((r - r0) * (r - r0) + (c - c0) * (c - c0)) / (2 * sigma * sigma)));
  return f;
}

double total(const Field& f) { return std::accumulate(f.data().begin(), f.data().end(), 0.0); }

std::pair<int, int> argmax(const Field& f) {
  const auto it = std::max_element(f.data().begin(), f.data().end());
  const auto i = static_cast<int>(it - f.data().begin());
  return {i / f.spec().width, i % f.spec().width};
}

}  // namespace

TEST_CASE("physics config stability limits") {
  PhysicsConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.kappa = 0.26 * cfg.dx * cfg.dx / cfg.dt;
  CHECK_THROWS_AS(cfg.validate(), NumericError);
  cfg = PhysicsConfig{};
  CHECK_NOTHROW(cfg.check_cfl(cfg.max_stable_wind()));
  CHECK_THROWS_AS(cfg.check_cfl(cfg.max_stable_wind() * 1.01), NumericError);
  GridSpec s{8, 8, 1, 1, 1};
  CHECK_THROWS_AS(step(Field(s, {"tracer"}, {"1"}), uniform_wind(s, 3.0, 0.0), cfg), NumericError);
}

TEST_CASE("terrain archetypes") {
  GridSpec s{32, 64, 2, 8, 8};
  TerrainOptions o;
  o.archetype = Archetype::flat;
  const auto flat = gen_terrain(s, 1, o);
  CHECK(std::all_of(flat.elevation.begin(), flat.elevation.end(), [](float h) { return h == 0.0f; }));

  o.archetype = Archetype::basin;
  const auto basin = gen_terrain(s, 2, o);
  const float centre = basin.elevation[static_cast<std::size_t>(16) * 64 + 32];
  const float rim = *std::max_element(basin.elevation.begin(), basin.elevation.end());
  CHECK(centre < rim);
  CHECK(*std::min_element(basin.elevation.begin(), basin.elevation.end()) < rim);

  o.archetype = Archetype::ridge;
  const auto ridge = gen_terrain(s, 3, o);
  CHECK(*std::max_element(ridge.elevation.begin(), ridge.elevation.end()) > 1000.0f);

  for (auto a : {Archetype::flat, Archetype::ridge, Archetype::basin, Archetype::basin_ridge}) {
    o.archetype = a;
    const auto tw = gen_terrain(s, 9, o);
    CHECK(tw.max_wind() <= o.wind.max_wind + 1e-6);
    CHECK(archetype_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(archetype_from_string("plateau"), ConfigError);
}

TEST_CASE("terrain generation is deterministic") {
  GridSpec s{16, 32, 2, 4, 4};
  const auto a = gen_terrain(s, 42);
  const auto b = gen_terrain(s, 42);
  CHECK(a.to_field() == b.to_field());
  CHECK(a.archetype == b.archetype);
  CHECK_FALSE(gen_terrain(s, 43).to_field() == a.to_field());
}

TEST_CASE("step with no dynamics is the identity") {
  GridSpec s{8, 16, 1, 1, 1};
  PhysicsConfig cfg;
  cfg.kappa = 0.0;
  const Field c = testing::random_field(s, {"tracer"}, 5, 0.0, 10.0);
  CHECK(step(c, uniform_wind(s, 0.0, 0.0), cfg) == c);
}

TEST_CASE("periodic mass conservation over 100 steps") {
  GridSpec s{32, 64, 2, 8, 8};
  PhysicsConfig cfg;
  TerrainOptions o;
  o.archetype = Archetype::basin_ridge;
  const auto tw = gen_terrain(s, 11, o);
  Field c = testing::random_field(s, {"tracer"}, 6, 0.0, 50.0);
  const double m0 = total(c);
  for (int i = 0; i < 100; ++i) c = step(c, tw, cfg);
  CHECK(std::abs(total(c) - m0) / m0 < 1e-5);
  CHECK(*std::min_element(c.data().begin(), c.data().end()) >= 0.0f);
}

TEST_CASE("nonnegativity with clamped boundaries, sources and decay") {
  GridSpec s{16, 16, 1, 1, 1};
  PhysicsConfig cfg;
  cfg.boundary = Boundary::clamped;
  cfg.sources = {{3, 4, 0.01}};
  cfg.sink = 1e-5;
  const auto tw = gen_terrain(s, 4);
  Field c = gaussian(s, 8, 8, 2.0);
  for (int i = 0; i < 50; ++i) c = step(c, tw, cfg);
  CHECK(*std::min_element(c.data().begin(), c.data().end()) >= 0.0f);
}

TEST_CASE("sink acts as exp(-D dt) decay") {
  GridSpec s{4, 4, 1, 1, 1};
  PhysicsConfig cfg;
  cfg.kappa = 0.0;
  cfg.sink = 1e-4;
  Field c(s, {"tracer"}, {"1"}, std::vector<float>(16, 10.0f));
  const Field out = step(c, uniform_wind(s, 0.0, 0.0), cfg);
  CHECK(out.data()[5] == doctest::Approx(10.0 * std::exp(-0.36)));
}

TEST_CASE("advected Gaussian peak matches analytic displacement") {
  GridSpec s{32, 64, 1, 1, 1};
  PhysicsConfig cfg;
  cfg.kappa = 0.0;
  const double u = 1.5, v = -1.0;
  const auto tw = uniform_wind(s, u, v);
  Field c = gaussian(s, 20, 10, 3.0);
  const int n = 40;
  for (int i = 0; i < n; ++i) c = step(c, tw, cfg);
  const auto [pr, pc] = argmax(c);
  const int expect_c = 10 + static_cast<int>(std::lround(n * u * cfg.dt / cfg.dx));
  const int expect_r = 20 + static_cast<int>(std::lround(n * v * cfg.dt / cfg.dx));
  CHECK(std::abs(pc - expect_c) <= 1);
  CHECK(std::abs(pr - expect_r) <= 1);
}

TEST_CASE("positive v moves mass northward (toward larger rows)") {
  GridSpec s{16, 16, 1, 1, 1};
  PhysicsConfig cfg;
  cfg.kappa = 0.0;
  Field c = gaussian(s, 5, 8, 1.5);
  for (int i = 0; i < 20; ++i) c = step(c, uniform_wind(s, 0.0, 2.0), cfg);
  CHECK(argmax(c).first > 5);
}

TEST_CASE("sample seeds and step counts") {
  CHECK(sample_seed(1, 0) != sample_seed(1, 1));
  CHECK(sample_seed(1, 0) != sample_seed(2, 0));
  PhysicsConfig cfg;
  DatasetOptions o;
  CHECK(steps_for_hours(12, cfg, o) == 12);
  CHECK(steps_for_hours(96, cfg, o) == 96);
  CHECK_THROWS_AS(steps_for_hours(18, cfg, o), ConfigError);
}

TEST_CASE("make_dataset basics") {
  GridSpec s{16, 32, 2, 4, 4};
  PhysicsConfig cfg;
  const auto tw = gen_terrain(s, 3);
  CHECK(make_dataset(s, tw, cfg, {12, 24}, 0, 1).empty());

  const auto a = make_dataset(s, tw, cfg, {12, 24, 48, 96}, 6, 77);
  const auto b = make_dataset(s, tw, cfg, {12, 24, 48, 96}, 6, 77, {}, 3);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].input == b[i].input);
    for (std::size_t h = 0; h < 4; ++h) CHECK(a[i].targets[h] == b[i].targets[h]);
    CHECK(a[i].seed == sample_seed(77, i));
    CHECK(a[i].input.channels() == channels::input_order());
  }
  // Any single sample is reproducible on its own.
  CHECK(make_sample(s, tw, cfg, {12, 24, 48, 96}, sample_seed(77, 4)).targets[3] == a[4].targets[3]);
}

TEST_CASE("one step of zero dynamics reproduces the tracer") {
  GridSpec s{8, 8, 2, 2, 2};
  PhysicsConfig cfg;
  cfg.kappa = 0.0;
  cfg.dt = 12 * 3600.0;
  cfg.dx = 1e9;  // keeps Courant tiny; winds are zeroed anyway
  TerrainWind tw = uniform_wind(s, 0.0, 0.0);
  DatasetOptions o;
  o.vary_wind = false;
  o.random_sources = 0;
  const Sample smp = make_sample(s, tw, cfg, {12}, 5, o);
  const auto tracer = smp.input.channel(channels::tracer);
  REQUIRE(smp.targets.size() == 1);
  CHECK(std::equal(tracer.begin(), tracer.end(), smp.targets[0].data().begin()));
}

TEST_CASE("covariance lag zero equals field variance") {
  GridSpec s{8, 8, 1, 1, 1};
  std::vector<Field> fs;
  std::vector<const Field*> ptr;
  for (int i = 0; i < 5; ++i) fs.push_back(testing::random_field(s, {"tracer"}, 100 + i));
  for (auto& f : fs) ptr.push_back(&f);
  // Independent oracle: per-cell ensemble anomalies, mean of squares.
  double var = 0.0;
  for (std::size_t c = 0; c < s.cells(); ++c) {
    double m = 0.0;
    for (auto& f : fs) m += f.data()[c];
    m /= 5.0;
    for (auto& f : fs) var += (f.data()[c] - m) * (f.data()[c] - m);
  }
  var /= 5.0 * s.cells();
  CHECK(lagged_covariance(ptr, 0, 0) == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("white noise covariance is isotropic") {
  GridSpec s{32, 64, 1, 1, 1};
  TerrainWind tw = uniform_wind(s, 1.0, 0.5);
  std::vector<Sample> samples;
  for (int i = 0; i < 32; ++i) {
    Sample smp;
    smp.lead_times = {12};
    smp.targets = {testing::random_field(s, {"tracer"}, 500 + i)};
    samples.push_back(smp);
  }
  const auto fit = fit_covariance_decay(samples, tw, PhysicsConfig{});
  CHECK(fit.along_length == doctest::Approx(fit.cross_length).epsilon(0.25));
  CHECK(fit.along_length < 1.0);
  samples.resize(31);
  CHECK_THROWS_AS(fit_covariance_decay(samples, tw, PhysicsConfig{}), NumericError);
}

TEST_CASE("advection-dominated plumes decorrelate slower along the wind") {
  GridSpec s{32, 64, 2, 8, 8};
  PhysicsConfig cfg;
  TerrainOptions o;
  o.archetype = Archetype::flat;
  o.wind_direction = 0.4;
  o.wind.perturbation = 0.0;
  o.wind.speed = 2.0;
  const auto tw = gen_terrain(s, 8, o);
  // Peclet number with the cell size as length scale.
  CHECK(2.0 * cfg.dx / cfg.kappa >= 10.0);
  DatasetOptions d;
  d.vary_wind = false;
  const auto samples = make_dataset(s, tw, cfg, {12, 24, 48}, 40, 8, d);
  const auto fit = fit_covariance_decay(samples, tw, cfg);
  CHECK(fit.along_length > fit.cross_length);
  CHECK(fit.advective_length > 0.0);
}

TEST_CASE("divergence damping scales the centred divergence") {
  GridSpec s{32, 64, 2, 8, 8};
  TerrainOptions o;
  o.archetype = Archetype::basin_ridge;
  const auto tw = gen_terrain(s, 21, o);
  auto div_rms = [&](double keep, double& max_speed) {
    WindOptions w;
    w.direction = 0.7;
    w.speed = 1.0;
    w.max_wind = 100.0;  // no cap, so the field is not rescaled
    w.divergence_keep = keep;
    std::vector<float> u, v;
    make_wind(s, tw.elevation, PhysicsConfig{}.dx, w, 5, u, v);
    double acc = 0.0;
    max_speed = 0.0;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 64; ++c) {
        const double d = 0.5 * (u[r * 64 + (c + 1) % 64] - u[r * 64 + (c + 63) % 64]) +
                         0.5 * (v[((r + 1) % 32) * 64 + c] - v[((r + 31) % 32) * 64 + c]);
        acc += d * d;
        max_speed = std::max({max_speed, std::abs(double(u[r * 64 + c])), std::abs(double(v[r * 64 + c]))});
      }
    return std::sqrt(acc / (32 * 64));
  };
  double m1, m2, m3;
  const double full = div_rms(1.0, m1), damped = div_rms(0.3, m2), none = div_rms(0.0, m3);
  CHECK(full > 0.05);
  CHECK(damped / full == doctest::Approx(0.3).epsilon(1e-4));
  CHECK(none < 1e-5 * full);
}
