#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "topoflow/fields.hpp"
#include "topoflow/model.hpp"

namespace topoflow::train {

using model::Group;
using model::Matrix;
using model::ParamStore;

struct TrainConfig {
  std::map<Group, double> lr{{Group::base, 1e-4}, {Group::embedding, 2e-4}, {Group::head, 5e-5}, {Group::backbone, 1e-5}};
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_steps = 2000;
  int total_steps = 20000;
  double lr_min = 1e-6;
  double clip_norm = 1.0;
  int batch_size = 4;
  int epochs = 60;  // cap; total_steps is the budget
  int patience = 10;
  int val_interval = 100;
  std::uint64_t seed = 0;
  bool per_channel_mean = false;  // divide the loss by horizons * channels as well
  int alpha_reset_step = -1;      // reinitialise alpha at this step (off when < 0)
  int stop_after = 0;             // end this session after this many total steps (0 = no cap)

  void validate() const;
};

/// Sum over channels and cells of mask * (pred - target)^2 divided by the mask
/// count. pred/target hold `channels` stacked planes of H x W each.
double masked_mse(std::span<const float> pred, std::span<const float> target, const LandMask& mask);
/// Field form; channels of all fields are summed.
double masked_mse(const std::vector<Field>& pred, const std::vector<Field>& target, const LandMask& mask);

/// Token-space loss used in training. Returns the loss and writes
/// d(loss)/d(pred) into grad when non-null.
double masked_mse_tokens(const Matrix& pred, const Matrix& target, const Matrix& mask_tokens, double mask_count,
                         double extra_divisor, Matrix* grad);

/// Linear warmup from 0, cosine decay to lr_min at total_steps, flat after.
double lr_at(std::int64_t step, const TrainConfig& cfg, Group group);

struct TrainState {
  std::int64_t step = 0;
  ParamStore m, v;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_validations = 0;
  std::mt19937_64 rng;
  int epoch = 0;
  std::size_t cursor = 0;
  std::vector<std::size_t> order;
  double train_loss_acc = 0.0;
  int train_loss_count = 0;
  bool finished = false;

  static TrainState fresh(const ParamStore& params, std::uint64_t seed);
};

/// Global-norm clip, AdamW moments, decoupled decay at each group's rate,
/// step counter advanced. Throws NumericError without touching anything when
/// a gradient is non-finite. Returns the pre-clip gradient norm.
double optimize_step(ParamStore& params, ParamStore& grads, TrainState& state, const TrainConfig& cfg);

/// Clip factor for a given global norm.
double global_norm(ParamStore& grads);

struct LogEntry {
  std::int64_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr_base = 0.0;
  double alpha = 0.0;
};

/// One sample prepared for training: model input, normalized target tokens.
struct Prepared {
  model::ModelInput input;
  Matrix target;  // N x token_out, normalized
};

Prepared prepare(const Sample& s, const NormStats& stats, const model::ModelConfig& cfg);

/// Mask in token layout (N x token_out) and its cell count.
Matrix mask_tokens(const LandMask& mask, const model::ModelConfig& cfg);

struct FitResult {
  ParamStore params;       // last iterate
  ParamStore best_params;  // lowest validation loss
  TrainState state;
  std::vector<LogEntry> log;
  bool early_stopped = false;
  double final_val = 0.0;
};

struct FitOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoint, loss log, train state
  std::string config_echo;
  const TrainState* resume = nullptr;
  const ParamStore* resume_params = nullptr;
  const ParamStore* resume_best = nullptr;
  std::vector<LogEntry> resume_log;
  bool verbose = false;
};

double validation_loss(const std::vector<Sample>& val, const ParamStore& params, const model::ModelConfig& mcfg,
                       const TrainConfig& tcfg, const NormStats& stats, const LandMask& mask);

FitResult fit(const std::vector<Sample>& train, const std::vector<Sample>& val, const LandMask& mask,
              const NormStats& stats, const model::ModelConfig& mcfg, const TrainConfig& tcfg,
              const FitOptions& opts = {});

/// Binary train-state snapshot with exact double parameters, moments, best
/// iterate, schedule position and generator state.
void save_state(const std::filesystem::path& path, const FitResult& r);
FitResult load_state(const std::filesystem::path& path, const model::ModelConfig& mcfg);

std::string format_log(const std::vector<LogEntry>& log);

// --- ablations --------------------------------------------------------------

struct Variant {
  std::string name;
  bool wind_reorder = false;
  bool elev_bias = false;
  int tile_rows = 0;  // sector grid (tiles down x tiles across); 0 keeps the model config's sectors
  int tile_cols = 0;
};

/// Baseline, +wind, +wind+elev.
std::vector<Variant> component_variants();
/// Global wind direction plus the given tile grids, wind reordering only.
std::vector<Variant> tile_variants(const std::vector<std::pair<int, int>>& grids);

struct AblationRow {
  Variant variant;
  std::uint64_t seed = 0;
  double final_val = 0.0;
  double best_val = 0.0;
  std::int64_t steps = 0;
};

/// Applies a variant's toggles and sector layout to a model config.
model::ModelConfig apply_variant(const model::ModelConfig& base, const Variant& v);

std::vector<AblationRow> ablation_run(const std::vector<Sample>& train, const std::vector<Sample>& val,
                                      const LandMask& mask, const NormStats& stats, const model::ModelConfig& mcfg,
                                      const TrainConfig& tcfg, const std::vector<Variant>& variants,
                                      const std::vector<std::uint64_t>& seeds, bool verbose = false);

/// Median best-validation loss per variant name, in variant order.
std::vector<std::pair<std::string, double>> median_best(const std::vector<AblationRow>& rows);

/// Component table: model, scanning, wind tiles, elevation alpha, val loss.
std::string component_table(const std::vector<AblationRow>& rows);
/// Tile table: strategy, tiles, loss, delta vs global.
std::string tile_table(const std::vector<AblationRow>& rows);
std::string rows_csv(const std::vector<AblationRow>& rows);

}  // namespace topoflow::train
