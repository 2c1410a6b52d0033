#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "topoflow/config.hpp"
#include "topoflow/dataset_io.hpp"
#include "topoflow/fields.hpp"
#include "topoflow/model.hpp"

namespace testing {

using topoflow::Field;
using topoflow::GridSpec;

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("topoflow_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Field random_field(const GridSpec& spec, const std::vector<std::string>& names, std::uint64_t seed,
                          double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(spec, names, std::vector<std::string>(names.size(), "1"));
  for (auto& x : f.data()) x = static_cast<float>(u(rng));
  return f;
}

/// Raw model input: winds, tracer, coordinates, elevation and time channels.
inline Field model_input(const GridSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto& names = topoflow::channels::input_order();
  Field f(spec, names, topoflow::channels::input_units());
  for (std::size_t c = 0; c < names.size(); ++c)
    for (int r = 0; r < spec.height; ++r)
      for (int col = 0; col < spec.width; ++col) {
        double v = u(rng);
        if (names[c] == "elevation") v = 1000.0 + 800.0 * v;
        if (names[c] == "tracer") v = 10.0 + 5.0 * v;
        f.at(c, r, col) = static_cast<float>(v);
      }
  return f;
}

inline topoflow::NormStats identity_stats() {
  topoflow::NormStats s;
  for (const auto& n : topoflow::channels::input_order()) s.channels[n] = topoflow::ChannelNorm::identity();
  s.channels["elevation"] = topoflow::ChannelNorm::minmax(0.0, 2000.0);
  return s;
}

/// Small run configuration: 8 x 16 grid, two horizons, narrow model.
inline topoflow::RunConfig tiny_run(std::size_t count = 12) {
  topoflow::RunConfig c;
  c.grid = GridSpec{8, 16, 2, 2, 2};
  c.count = count;
  c.horizons = {12, 24};
  c.val_fraction = 0.2;
  c.test_fraction = 0.2;
  c.model.d = 8;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.mlp = 16;
  c.model.dropout = 0.1;
  c.train.warmup_steps = 4;
  c.train.total_steps = 20;
  c.train.val_interval = 4;
  c.train.batch_size = 2;
  c.finalize();
  return c;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace testing
