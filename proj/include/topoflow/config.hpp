#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "topoflow/model.hpp"
#include "topoflow/synthdata.hpp"
#include "topoflow/train.hpp"

namespace topoflow {

/// Everything a command needs, resolvable from one `key = value` file plus
/// overrides. Keys are dotted (`model.d`, `train.lr.head`).
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;

  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "out";
  std::filesystem::path checkpoint;  // eval/dump; defaults to <out>/checkpoint.gfd

  GridSpec grid{32, 64, 2, 8, 8};
  synth::PhysicsConfig physics;
  synth::TerrainOptions terrain;
  synth::DatasetOptions data;
  std::size_t count = 100;
  std::vector<int> horizons{12, 24, 48, 96};
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  double mask_fraction = 0.45;

  model::ModelConfig model;
  train::TrainConfig train;

  std::vector<std::uint64_t> ablate_seeds{0, 1, 2, 3, 4};
  std::string ablate_mode = "component";  // component | tiles
  std::vector<std::pair<int, int>> ablate_tiles{{2, 2}, {4, 4}, {8, 8}};

  int dump_layer = 0;
  std::size_t dump_sample = 0;

  RunConfig();

  /// Sets one key from its text form; throws ConfigError for unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Applies `key = value` lines; `#` starts a comment.
  void apply_text(const std::string& text, const std::string& origin = "config");
  void apply_file(const std::filesystem::path& path);

  /// Copies the grid into the model and the root seed into training, then
  /// checks every invariant.
  void finalize();
  /// Every key with its resolved value, one per line, in fixed order.
  std::string echo() const;

  std::filesystem::path checkpoint_path() const { return checkpoint.empty() ? out_dir / "checkpoint.gfd" : checkpoint; }
};

/// Independent stream seeds split from the root seed.
namespace streams {
inline constexpr std::uint64_t terrain = 1;
inline constexpr std::uint64_t samples = 2;
inline constexpr std::uint64_t mask = 3;
}  // namespace streams
std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream);

}  // namespace topoflow
