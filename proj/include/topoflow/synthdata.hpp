#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "topoflow/fields.hpp"

namespace topoflow::synth {

enum class Boundary { periodic, clamped };

/// Point emission in concentration units per second.
struct Source {
  int row = 0;
  int col = 0;
  double rate = 0.0;
};

/// Explicit integrator settings for dc/dt + u.grad(c) = kappa lap(c) + Q - D.
struct PhysicsConfig {
  double kappa = 200.0;  // m^2/s
  double dt = 3600.0;    // s
  double dx = 15000.0;   // m
  Boundary boundary = Boundary::periodic;
  std::vector<Source> sources;
  double sink = 0.0;  // 1/s, applied as exp(-sink*dt)

  /// Checks kappa*dt/dx^2 <= 0.25 and positivity of every scale.
  void validate() const;
  /// Checks the advective Courant limit max(|u|,|v|)*dt/dx <= 0.5.
  void check_cfl(double max_wind) const;
  /// Largest wind component admitted by the Courant limit.
  double max_stable_wind() const { return 0.5 * dx / dt; }
};

enum class Archetype { flat, ridge, basin, basin_ridge };

std::string to_string(Archetype a);
Archetype archetype_from_string(const std::string& s);

struct WindOptions {
  double direction = 0.0;     // radians, counter-clockwise from east
  double speed = 1.0;         // m/s of the large-scale flow
  double perturbation = 0.3;  // relative amplitude of the solenoidal eddies
  double blocking = 1.0;      // 0 = terrain-blind, 1 = full deflection on steep slopes
  double slope_scale = 0.02;  // slope (m/m) at which deflection saturates
  double max_wind = 2.0;      // cap on max(|u|, |v|)
  double divergence_keep = 0.3;  // fraction of the divergent part kept after deflection
};

struct TerrainOptions {
  std::optional<Archetype> archetype;  // drawn from the seed when unset (flat, ridge, basin)
  double peak_elevation = 2500.0;      // m
  std::optional<double> wind_direction;  // drawn from the seed when unset
  WindOptions wind;
};

/// Terrain and a steady wind field in physical units, row-major H x W.
struct TerrainWind {
  GridSpec spec;
  Archetype archetype = Archetype::flat;
  std::vector<float> elevation;  // m
  std::vector<float> u;          // m/s, eastward
  std::vector<float> v;          // m/s, northward
  std::uint64_t seed = 0;

  double max_wind() const;
  Field to_field() const;
  static TerrainWind from_field(const Field& f);
};

TerrainWind gen_terrain(const GridSpec& spec, std::uint64_t seed, const TerrainOptions& opts = {});

/// Large-scale wind plus divergence-free eddies, deflected along terrain
/// contours where slopes are steep and capped at opts.max_wind.
void make_wind(const GridSpec& spec, const std::vector<float>& elevation, double dx, const WindOptions& opts,
               std::uint64_t seed, std::vector<float>& u, std::vector<float>& v);

/// One operator-split explicit step: upwind flux-form advection in x then y,
/// 5-point diffusion, sources, multiplicative decay. Input and output are
/// single-channel fields.
Field step(const Field& c, const TerrainWind& tw, const PhysicsConfig& cfg);

struct DatasetOptions {
  int hours_per_step = 12;     // one horizon step; several integrator steps when dt is smaller
  bool vary_wind = true;       // draw a fresh wind regime per sample from the terrain
  WindOptions wind;            // per-sample regime settings; direction and speed are redrawn
  double min_speed_fraction = 0.4;
  int blobs = 6;               // initial Gaussian puffs per sample
  double blob_amplitude = 60.0;
  double background = 10.0;
  int random_sources = 0;      // extra point sources drawn per sample (absent from the input)
  double source_rate = 5e-3;   // per second
  bool random_timestamp = true;
};

/// Per-sample seed: splitmix64 finalizer over (root, index), so samples can
/// be generated in any order or in parallel.
std::uint64_t sample_seed(std::uint64_t root, std::uint64_t index);

/// Integrator steps needed to reach a lead time; throws ConfigError when the
/// lead time is not a whole number of steps.
int steps_for_hours(int hours, const PhysicsConfig& cfg, const DatasetOptions& opts);

Sample make_sample(const GridSpec& spec, const TerrainWind& tw, const PhysicsConfig& cfg,
                   const std::vector<int>& horizons, std::uint64_t seed, const DatasetOptions& opts = {});

std::vector<Sample> make_dataset(const GridSpec& spec, const TerrainWind& tw, const PhysicsConfig& cfg,
                                 const std::vector<int>& horizons, std::size_t count, std::uint64_t seed,
                                 const DatasetOptions& opts = {}, int threads = 1);

struct CovarianceFit {
  double along_length = 0.0;  // cells
  double cross_length = 0.0;  // cells
  double residual = 0.0;      // rms of the log-linear fit
  double advective_length = 0.0;  // cells, |u| * tau / dx with tau the last lead time
  double variance = 0.0;          // lag-0 covariance
  std::vector<double> along_cov;  // |cov| by lag step
  std::vector<double> cross_cov;
};

/// Exponential fit of |Cov(c_i, c_j)| against separation along the mean wind
/// direction and perpendicular to it. Uses the last target field of each
/// sample; anomalies are taken against the per-cell ensemble mean.
CovarianceFit fit_covariance_decay(const std::vector<Sample>& samples, const TerrainWind& tw,
                                   const PhysicsConfig& cfg, int max_lag = 8);

/// Covariance of a field ensemble at a fixed cell offset, averaged over all
/// base cells with periodic wrap.
double lagged_covariance(const std::vector<const Field*>& fields, int drow, int dcol);

}  // namespace topoflow::synth
