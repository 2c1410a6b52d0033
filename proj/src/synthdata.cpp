#include "topoflow/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include <unsupported/Eigen/FFT>

namespace topoflow::synth {

namespace {

constexpr double pi = std::numbers::pi;

std::size_t idx(const GridSpec& s, int row, int col) { return static_cast<std::size_t>(row) * s.width + col; }

int wrap(int i, int n) { return ((i % n) + n) % n; }

/// Removes (1 - keep) of the divergent part of a periodic wind, using the
/// spectral symbol of the centred difference so the centred divergence of the
/// result is `keep` times the original.
void damp_divergence(const GridSpec& spec, std::vector<double>& u, std::vector<double>& v, double keep) {
  const int H = spec.height, W = spec.width;
  using Complex = std::complex<double>;
  Eigen::FFT<double> fft;
  // Row transforms then column transforms.
  auto forward2d = [&](const std::vector<double>& in) {
    std::vector<Complex> out(in.size());
    std::vector<Complex> row(W), tmp(W), col(H), ctmp(H);
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) row[c] = in[idx(spec, r, c)];
      fft.fwd(tmp, row);
      for (int c = 0; c < W; ++c) out[idx(spec, r, c)] = tmp[c];
    }
    for (int c = 0; c < W; ++c) {
      for (int r = 0; r < H; ++r) col[r] = out[idx(spec, r, c)];
      fft.fwd(ctmp, col);
      for (int r = 0; r < H; ++r) out[idx(spec, r, c)] = ctmp[r];
    }
    return out;
  };
  auto inverse2d = [&](std::vector<Complex> in, std::vector<double>& out) {
    std::vector<Complex> row(W), tmp(W), col(H), ctmp(H);
    for (int c = 0; c < W; ++c) {
      for (int r = 0; r < H; ++r) col[r] = in[idx(spec, r, c)];
      fft.inv(ctmp, col);
      for (int r = 0; r < H; ++r) in[idx(spec, r, c)] = ctmp[r];
    }
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) row[c] = in[idx(spec, r, c)];
      fft.inv(tmp, row);
      for (int c = 0; c < W; ++c) out[idx(spec, r, c)] = tmp[c].real();
    }
  };
  auto uh = forward2d(u), vh = forward2d(v);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double kx = std::sin(2.0 * pi * c / W), ky = std::sin(2.0 * pi * r / H);
      const double k2 = kx * kx + ky * ky;
      if (k2 < 1e-12) continue;
      const std::size_t i = idx(spec, r, c);
      const Complex along = (kx * uh[i] + ky * vh[i]) * ((1.0 - keep) / k2);
      uh[i] -= kx * along;
      vh[i] -= ky * along;
    }
  inverse2d(std::move(uh), u);
  inverse2d(std::move(vh), v);
}

}  // namespace

// --- config -----------------------------------------------------------------

void PhysicsConfig::validate() const {
  if (!(dt > 0.0) || !(dx > 0.0)) throw ConfigError("physics: dt and dx must be positive");
  if (!(kappa >= 0.0) || !(sink >= 0.0)) throw ConfigError("physics: kappa and sink must be non-negative");
  if (kappa * dt / (dx * dx) > 0.25)
    throw NumericError("stability error: diffusion number kappa*dt/dx^2 = " + std::to_string(kappa * dt / (dx * dx)) +
                       " exceeds 0.25");
  for (const auto& s : sources)
    if (!std::isfinite(s.rate)) throw ConfigError("physics: non-finite source rate");
}

void PhysicsConfig::check_cfl(double max_wind) const {
  const double courant = max_wind * dt / dx;
  if (courant > 0.5 * (1.0 + 1e-12))  // rounding slack for winds at the limit
    throw NumericError("stability error: Courant number " + std::to_string(courant) + " exceeds 0.5");
}

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::flat: return "flat";
    case Archetype::ridge: return "ridge";
    case Archetype::basin: return "basin";
    case Archetype::basin_ridge: return "basin_ridge";
  }
  return "flat";
}

Archetype archetype_from_string(const std::string& s) {
  if (s == "flat") return Archetype::flat;
  if (s == "ridge") return Archetype::ridge;
  if (s == "basin") return Archetype::basin;
  if (s == "basin_ridge") return Archetype::basin_ridge;
  throw ConfigError("unknown terrain archetype '" + s + "'");
}

// --- terrain ----------------------------------------------------------------

double TerrainWind::max_wind() const {
  double m = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) m = std::max({m, std::abs(double(u[i])), std::abs(double(v[i]))});
  return m;
}

Field TerrainWind::to_field() const {
  std::vector<float> data;
  data.reserve(3 * elevation.size());
  data.insert(data.end(), elevation.begin(), elevation.end());
  data.insert(data.end(), u.begin(), u.end());
  data.insert(data.end(), v.begin(), v.end());
  return Field(spec, {"elevation", "u", "v"}, {"m", "m/s", "m/s"}, std::move(data));
}

TerrainWind TerrainWind::from_field(const Field& f) {
  TerrainWind tw;
  tw.spec = f.spec();
  auto copy = [&](const char* name) {
    auto ch = f.channel(name);
    return std::vector<float>(ch.begin(), ch.end());
  };
  tw.elevation = copy("elevation");
  tw.u = copy("u");
  tw.v = copy("v");
  return tw;
}

namespace {

// Elevation for one archetype on a [0,1]x[0,1] frame with y = northward;
// x distances are stretched by the aspect ratio so features stay round.
double archetype_height(Archetype a, double x, double y, double aspect, double peak, double ridge_x,
                        double basin_x, double basin_y) {
  constexpr double floor_m = 150.0;
  auto ridge = [&](double cx) {
    const double d = (x - cx) * aspect;
    return peak * std::exp(-(d * d) / (2.0 * 0.05 * 0.05));
  };
  // Shallow floor inside a rim ring; beyond the rim the land stays elevated.
  auto basin = [&](double cx, double cy, double radius) {
    const double dx = (x - cx) * aspect, dy = y - cy;
    const double r = std::sqrt(dx * dx + dy * dy);
    constexpr double w = 0.08;
    const double rim = std::exp(-((r - radius) * (r - radius)) / (2.0 * w * w));
    return floor_m + peak * (r < radius ? rim : std::max(rim, 0.55));
  };
  switch (a) {
    case Archetype::flat: return 0.0;
    case Archetype::ridge: return ridge(ridge_x);
    case Archetype::basin: return basin(basin_x, basin_y, 0.3);
    case Archetype::basin_ridge: {
      // Enclosed basin in the west, free-standing north-south ridge in the east.
      const double b = x < 0.55 ? basin(basin_x, basin_y, 0.35) : floor_m;
      return std::max(b, ridge(ridge_x));
    }
  }
  return 0.0;
}

}  // namespace

TerrainWind gen_terrain(const GridSpec& spec, std::uint64_t seed, const TerrainOptions& opts) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TerrainWind tw;
  tw.spec = spec;
  tw.seed = seed;
  tw.archetype = opts.archetype ? *opts.archetype : static_cast<Archetype>(rng() % 3);

  const double aspect = static_cast<double>(spec.width) / spec.height;
  double ridge_x = 0.5 + 0.2 * (unit(rng) - 0.5);
  double basin_x = 0.5 + 0.05 * (unit(rng) - 0.5);
  const double basin_y = 0.5 + 0.1 * (unit(rng) - 0.5);
  if (tw.archetype == Archetype::basin_ridge) {
    basin_x = 0.25 + 0.04 * (unit(rng) - 0.5);
    ridge_x = 0.8 + 0.04 * (unit(rng) - 0.5);
  }

  tw.elevation.resize(spec.cells());
  for (int r = 0; r < spec.height; ++r)
    for (int c = 0; c < spec.width; ++c) {
      const double x = (c + 0.5) / spec.width, y = (r + 0.5) / spec.height;
      tw.elevation[idx(spec, r, c)] = static_cast<float>(
          archetype_height(tw.archetype, x, y, aspect, opts.peak_elevation, ridge_x, basin_x, basin_y));
    }

  WindOptions wo = opts.wind;
  wo.direction = opts.wind_direction ? *opts.wind_direction : 2.0 * pi * unit(rng);
  make_wind(spec, tw.elevation, PhysicsConfig{}.dx, wo, rng(), tw.u, tw.v);
  return tw;
}

void make_wind(const GridSpec& spec, const std::vector<float>& elevation, double dx, const WindOptions& opts,
               std::uint64_t seed, std::vector<float>& u, std::vector<float>& v) {
  const int H = spec.height, W = spec.width;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Stream function from a handful of Gaussian eddies; periodic in both axes.
  std::vector<double> psi(spec.cells(), 0.0);
  const int eddies = 6;
  for (int e = 0; e < eddies; ++e) {
    const double cr = unit(rng) * H, cc = unit(rng) * W;
    const double radius = (0.1 + 0.15 * unit(rng)) * std::min(H, W);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        double dr = std::abs(r - cr), dc = std::abs(c - cc);
        dr = std::min(dr, H - dr);
        dc = std::min(dc, W - dc);
        psi[idx(spec, r, c)] += sign * radius * std::exp(-(dr * dr + dc * dc) / (2.0 * radius * radius));
      }
  }
  const double ub = opts.speed * std::cos(opts.direction);
  const double vb = opts.speed * std::sin(opts.direction);
  std::vector<double> uu(spec.cells()), vv(spec.cells());
  double eddy_max = 0.0;
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const double dpsi_dy = 0.5 * (psi[idx(spec, wrap(r + 1, H), c)] - psi[idx(spec, wrap(r - 1, H), c)]);
      const double dpsi_dx = 0.5 * (psi[idx(spec, r, wrap(c + 1, W))] - psi[idx(spec, r, wrap(c - 1, W))]);
      uu[idx(spec, r, c)] = dpsi_dy;
      vv[idx(spec, r, c)] = -dpsi_dx;
      eddy_max = std::max({eddy_max, std::abs(dpsi_dy), std::abs(dpsi_dx)});
    }
  const double eddy_scale = eddy_max > 0.0 ? opts.perturbation * opts.speed / eddy_max : 0.0;
  for (std::size_t i = 0; i < uu.size(); ++i) {
    uu[i] = ub + eddy_scale * uu[i];
    vv[i] = vb + eddy_scale * vv[i];
  }

  // Terrain deflection: remove the across-contour component in proportion to
  // slope steepness, so flow runs along valleys and around ridges and basins.
  if (opts.blocking > 0.0) {
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const auto at = [&](int rr, int cc) {
          return static_cast<double>(elevation[idx(spec, std::clamp(rr, 0, H - 1), std::clamp(cc, 0, W - 1))]);
        };
        const double gx = (at(r, c + 1) - at(r, c - 1)) / (2.0 * dx);
        const double gy = (at(r + 1, c) - at(r - 1, c)) / (2.0 * dx);
        const double g = std::hypot(gx, gy);
        if (g <= 0.0) continue;
        const double nx = gx / g, ny = gy / g;
        const std::size_t i = idx(spec, r, c);
        const double across = uu[i] * nx + vv[i] * ny;
        const double f = opts.blocking * std::min(1.0, g / opts.slope_scale);
        uu[i] -= f * across * nx;
        vv[i] -= f * across * ny;
      }
  }

  if (opts.divergence_keep < 1.0) damp_divergence(spec, uu, vv, opts.divergence_keep);

  double m = 0.0;
  for (std::size_t i = 0; i < uu.size(); ++i) m = std::max({m, std::abs(uu[i]), std::abs(vv[i])});
  const double scale = m > opts.max_wind ? opts.max_wind / m : 1.0;
  u.resize(spec.cells());
  v.resize(spec.cells());
  for (std::size_t i = 0; i < uu.size(); ++i) {
    u[i] = static_cast<float>(uu[i] * scale);
    v[i] = static_cast<float>(vv[i] * scale);
  }
  // float rounding must not push a component past the cap
  for (std::size_t i = 0; i < uu.size(); ++i) {
    u[i] = std::clamp(u[i], -static_cast<float>(opts.max_wind), static_cast<float>(opts.max_wind));
    v[i] = std::clamp(v[i], -static_cast<float>(opts.max_wind), static_cast<float>(opts.max_wind));
  }
}

// --- integrator -------------------------------------------------------------

namespace {

struct Stepper {
  const GridSpec& s;
  Boundary boundary;

  // Neighbor index along one axis; clamped boundaries copy the edge cell.
  int nb(int i, int n) const { return boundary == Boundary::periodic ? wrap(i, n) : std::clamp(i, 0, n - 1); }

  // Flux-form upwind advection along columns (axis = 1) or rows (axis = 0).
  void advect(std::vector<double>& c, const std::vector<float>& vel, double courant_scale, int axis) const {
    const int H = s.height, W = s.width;
    std::vector<double> out(c);
    const int n = axis == 1 ? W : H;
    for (int r = 0; r < H; ++r)
      for (int k = 0; k < W; ++k) {
        const int i = axis == 1 ? k : r;
        auto cell = [&](int j) { return axis == 1 ? idx(s, r, j) : idx(s, j, k); };
        const std::size_t self = cell(i);
        // Flux through the face between lo and lo+1. Clamped ghosts copy the
        // edge cell, so boundary faces carry the edge velocity and value.
        auto face_flux = [&](int lo) {
          const int a = nb(lo, n), b = nb(lo + 1, n);
          const double uf = 0.5 * (double(vel[cell(a)]) + double(vel[cell(b)]));
          return uf > 0.0 ? uf * c[cell(a)] : uf * c[cell(b)];
        };
        out[self] = c[self] - courant_scale * (face_flux(i) - face_flux(i - 1));
      }
    c.swap(out);
  }

  void diffuse(std::vector<double>& c, double number) const {
    if (number == 0.0) return;
    const int H = s.height, W = s.width;
    std::vector<double> out(c.size());
    for (int r = 0; r < H; ++r)
      for (int k = 0; k < W; ++k) {
        const double center = c[idx(s, r, k)];
        const double lap = c[idx(s, nb(r + 1, H), k)] + c[idx(s, nb(r - 1, H), k)] + c[idx(s, r, nb(k + 1, W))] +
                           c[idx(s, r, nb(k - 1, W))] - 4.0 * center;
        out[idx(s, r, k)] = center + number * lap;
      }
    c.swap(out);
  }
};

void step_in_place(std::vector<double>& c, const TerrainWind& tw, const PhysicsConfig& cfg,
                   const std::vector<Source>& extra_sources) {
  const Stepper st{tw.spec, cfg.boundary};
  const double courant_scale = cfg.dt / cfg.dx;
  st.advect(c, tw.u, courant_scale, 1);
  st.advect(c, tw.v, courant_scale, 0);
  st.diffuse(c, cfg.kappa * cfg.dt / (cfg.dx * cfg.dx));
  for (const auto* list : {&cfg.sources, &extra_sources})
    for (const auto& q : *list) c[idx(tw.spec, q.row, q.col)] += q.rate * cfg.dt;
  if (cfg.sink > 0.0) {
    const double decay = std::exp(-cfg.sink * cfg.dt);
    for (double& x : c) x *= decay;
  }
}

void check_step_inputs(const Field& c, const TerrainWind& tw, const PhysicsConfig& cfg) {
  if (c.num_channels() != 1) throw ShapeError("step expects a single-channel concentration field");
  if (!(c.spec().height == tw.spec.height && c.spec().width == tw.spec.width) || tw.u.size() != c.spec().cells() ||
      tw.v.size() != c.spec().cells())
    throw ShapeError("concentration and wind grids differ");
  cfg.validate();
  cfg.check_cfl(tw.max_wind());
  for (const auto& q : cfg.sources)
    if (q.row < 0 || q.row >= tw.spec.height || q.col < 0 || q.col >= tw.spec.width)
      throw ConfigError("source cell outside the grid");
}

}  // namespace

Field step(const Field& c, const TerrainWind& tw, const PhysicsConfig& cfg) {
  check_step_inputs(c, tw, cfg);
  std::vector<double> work(c.data().begin(), c.data().end());
  step_in_place(work, tw, cfg, {});
  Field out = c;
  for (std::size_t i = 0; i < work.size(); ++i) out.data()[i] = static_cast<float>(work[i]);
  return out;
}

// --- dataset ----------------------------------------------------------------

std::uint64_t sample_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int steps_for_hours(int hours, const PhysicsConfig& cfg, const DatasetOptions& opts) {
  if (opts.hours_per_step <= 0) throw ConfigError("hours_per_step must be positive");
  if (hours <= 0 || hours % opts.hours_per_step != 0)
    throw ConfigError("lead time " + std::to_string(hours) + " h is not a multiple of " +
                      std::to_string(opts.hours_per_step) + " h");
  const double per_step = opts.hours_per_step * 3600.0 / cfg.dt;
  const double rounded = std::round(per_step);
  if (rounded < 1.0 || std::abs(per_step - rounded) > 1e-9)
    throw ConfigError("hours_per_step must be a whole number of integrator steps of dt");
  return static_cast<int>(rounded) * (hours / opts.hours_per_step);
}

Sample make_sample(const GridSpec& spec, const TerrainWind& tw_base, const PhysicsConfig& cfg,
                   const std::vector<int>& horizons, std::uint64_t seed, const DatasetOptions& opts) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int H = spec.height, W = spec.width;

  TerrainWind tw = tw_base;
  if (opts.vary_wind) {
    WindOptions wo = opts.wind;
    wo.direction = 2.0 * pi * unit(rng);
    wo.max_wind = std::min(wo.max_wind, cfg.max_stable_wind());
    wo.speed = wo.max_wind * (opts.min_speed_fraction + (1.0 - opts.min_speed_fraction) * unit(rng));
    make_wind(spec, tw.elevation, cfg.dx, wo, rng(), tw.u, tw.v);
  }

  Timestamp ts;
  if (opts.random_timestamp) {
    ts.hour = static_cast<int>(rng() % 24);
    ts.doy = 1 + static_cast<int>(rng() % 365);
  }

  std::vector<double> c(spec.cells(), opts.background);
  for (int b = 0; b < opts.blobs; ++b) {
    const double cr = unit(rng) * H, cc = unit(rng) * W;
    const double sigma = (0.03 + 0.07 * unit(rng)) * std::min(H, W) + 0.5;
    const double amp = opts.blob_amplitude * (0.3 + 0.7 * unit(rng));
    for (int r = 0; r < H; ++r)
      for (int k = 0; k < W; ++k) {
        double dr = std::abs(r - cr), dc = std::abs(k - cc);
        dr = std::min(dr, H - dr);
        dc = std::min(dc, W - dc);
        c[idx(spec, r, k)] += amp * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
      }
  }
  std::vector<Source> extra;
  for (int q = 0; q < opts.random_sources; ++q)
    extra.push_back({static_cast<int>(rng() % H), static_cast<int>(rng() % W), opts.source_rate * (0.5 + unit(rng))});

  const auto enc = temporal_encoding(ts.hour, ts.doy);
  Sample s;
  s.seed = seed;
  s.timestamp = ts;
  s.lead_times = horizons;
  {
    Field in(spec, channels::input_order(), channels::input_units());
    auto fill = [&](const char* name, auto&& value) {
      auto ch = in.channel(in.channel_index(name));
      for (int r = 0; r < H; ++r)
        for (int k = 0; k < W; ++k) ch[idx(spec, r, k)] = static_cast<float>(value(r, k));
    };
    fill(channels::wind_u, [&](int r, int k) { return tw.u[idx(spec, r, k)]; });
    fill(channels::wind_v, [&](int r, int k) { return tw.v[idx(spec, r, k)]; });
    fill(channels::tracer, [&](int r, int k) { return c[idx(spec, r, k)]; });
    fill(channels::coord_y, [&](int r, int) { return (r + 0.5) / H; });
    fill(channels::coord_x, [&](int, int k) { return (k + 0.5) / W; });
    fill(channels::elevation, [&](int r, int k) { return tw.elevation[idx(spec, r, k)]; });
    fill(channels::hour_sin, [&](int, int) { return enc[0]; });
    fill(channels::hour_cos, [&](int, int) { return enc[1]; });
    fill(channels::doy_sin, [&](int, int) { return enc[2]; });
    fill(channels::doy_cos, [&](int, int) { return enc[3]; });
    s.input = std::move(in);
  }
  // The integrator consumes the float-rounded input so targets derive from
  // exactly what the model sees.
  {
    auto ch = s.input.channel(channels::tracer);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = ch[i];
  }

  cfg.validate();
  cfg.check_cfl(tw.max_wind());
  int done = 0;
  for (int hours : horizons) {
    const int target_steps = steps_for_hours(hours, cfg, opts);
    for (; done < target_steps; ++done) step_in_place(c, tw, cfg, extra);
    std::vector<float> data(c.begin(), c.end());
    s.targets.emplace_back(spec, std::vector<std::string>{channels::tracer}, std::vector<std::string>{"ug/m3"},
                           std::move(data));
  }
  s.validate();
  return s;
}

std::vector<Sample> make_dataset(const GridSpec& spec, const TerrainWind& tw, const PhysicsConfig& cfg,
                                 const std::vector<int>& horizons, std::size_t count, std::uint64_t seed,
                                 const DatasetOptions& opts, int threads) {
  spec.validate();
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (horizons[i] <= horizons[i - 1]) throw ConfigError("horizons must be strictly increasing");
  for (int h : horizons) steps_for_hours(h, cfg, opts);

  std::vector<Sample> out(count);
  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < count; i += stride)
      out[i] = make_sample(spec, tw, cfg, horizons, sample_seed(seed, i), opts);
  };
  threads = std::max(1, threads);
  if (threads == 1 || count < 2) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::mutex m;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          work(static_cast<std::size_t>(t), static_cast<std::size_t>(threads));
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }
  return out;
}

// --- covariance -------------------------------------------------------------

double lagged_covariance(const std::vector<const Field*>& fields, int drow, int dcol) {
  if (fields.empty()) throw NumericError("fit error: no fields");
  const GridSpec& s = fields.front()->spec();
  const std::size_t n = s.cells();
  std::vector<double> mean(n, 0.0);
  for (const Field* f : fields)
    for (std::size_t i = 0; i < n; ++i) mean[i] += f->data()[i];
  for (double& m : mean) m /= static_cast<double>(fields.size());
  double acc = 0.0;
  for (const Field* f : fields)
    for (int r = 0; r < s.height; ++r)
      for (int c = 0; c < s.width; ++c) {
        const std::size_t a = idx(s, r, c);
        const std::size_t b = idx(s, wrap(r + drow, s.height), wrap(c + dcol, s.width));
        acc += (f->data()[a] - mean[a]) * (f->data()[b] - mean[b]);
      }
  return acc / static_cast<double>(fields.size() * n);
}

namespace {

// Least-squares slope of log|cov| against distance; returns the e-folding length.
double fit_length(const std::vector<double>& dist, const std::vector<double>& cov, double var, double& residual) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < cov.size(); ++k) {
    const double a = std::abs(cov[k]);
    if (k > 0 && a < 0.05 * var) break;
    xs.push_back(dist[k]);
    ys.push_back(std::log(a));
  }
  if (xs.size() < 2) {
    // Decorrelated within one lag: e-folding length from the first step.
    const double a1 = std::max(std::abs(cov[1]), 1e-12 * var);
    residual = 0.0;
    return dist[1] / std::log(var / a1);
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) rss += std::pow(ys[i] - (icpt + slope * xs[i]), 2);
  residual = std::sqrt(rss / n);
  if (!(slope < 0.0)) return std::numeric_limits<double>::infinity();
  return -1.0 / slope;
}

}  // namespace

CovarianceFit fit_covariance_decay(const std::vector<Sample>& samples, const TerrainWind& tw,
                                   const PhysicsConfig& cfg, int max_lag) {
  if (samples.size() < 32) throw NumericError("fit error: at least 32 samples required");
  if (max_lag < 1) throw ConfigError("max_lag must be >= 1");
  std::vector<const Field*> fields;
  for (const auto& s : samples) fields.push_back(&s.targets.back());

  // Magnitude-weighted mean wind over the fit window.
  double su = 0, sv = 0, sw = 0;
  for (std::size_t i = 0; i < tw.u.size(); ++i) {
    const double w = std::hypot(tw.u[i], tw.v[i]);
    su += w * tw.u[i];
    sv += w * tw.v[i];
    sw += w;
  }
  const double theta = sw > 0.0 ? std::atan2(sv / sw, su / sw) : 0.0;
  const double mean_speed = sw > 0.0 ? std::hypot(su / sw, sv / sw) : 0.0;

  CovarianceFit fit;
  fit.variance = lagged_covariance(fields, 0, 0);
  if (!(fit.variance > 1e-12)) throw NumericError("fit error: fields have no variance");

  auto profile = [&](double angle, std::vector<double>& cov, std::vector<double>& dist) {
    for (int k = 0; k <= max_lag; ++k) {
      const int dc = static_cast<int>(std::lround(k * std::cos(angle)));
      const int dr = static_cast<int>(std::lround(k * std::sin(angle)));
      cov.push_back(k == 0 ? fit.variance : lagged_covariance(fields, dr, dc));
      dist.push_back(std::hypot(dr, dc));
    }
  };
  std::vector<double> da, dc;
  profile(theta, fit.along_cov, da);
  profile(theta + pi / 2.0, fit.cross_cov, dc);
  for (auto& x : fit.along_cov) x = std::abs(x);
  for (auto& x : fit.cross_cov) x = std::abs(x);
  double ra = 0, rc = 0;
  fit.along_length = fit_length(da, fit.along_cov, fit.variance, ra);
  fit.cross_length = fit_length(dc, fit.cross_cov, fit.variance, rc);
  fit.residual = std::max(ra, rc);
  const double tau = samples.front().lead_times.back() * 3600.0;
  fit.advective_length = mean_speed * tau / cfg.dx;
  return fit;
}

}  // namespace topoflow::synth
