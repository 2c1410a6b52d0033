#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topoflow/attention.hpp"
#include "topoflow/fields.hpp"
#include "topoflow/reorder.hpp"
#include "topoflow/topo_bias.hpp"

namespace topoflow::model {

using Matrix = attn::Mat<double>;
using Row = attn::RowVec<double>;

struct ModelConfig {
  GridSpec spec{32, 64, 2, 8, 8};
  int d = 64;
  int layers = 2;
  int heads = 4;
  int mlp = 256;
  int head_hidden = 0;  // hidden width of the prediction head; 0 means d
  double dropout = 0.1;
  int in_channels = 10;
  int out_channels = 1;
  int horizons = 4;
  bool wind_reorder = true;
  bool elev_bias = true;
  /// Reindex the positional embedding with the tokens. Off by default: the
  /// embedding belongs to sequence slots, so reordering changes what it encodes.
  bool pos_follows_patch = false;
  reorder::WindMean wind_mean = reorder::WindMean::weighted;
  topo::BiasCombine bias_combine = topo::BiasCombine::identity;

  void validate() const;
  int token_in() const { return in_channels * spec.patch * spec.patch; }
  int token_out() const { return out_channels * horizons * spec.patch * spec.patch; }
  int hidden() const { return head_hidden > 0 ? head_hidden : d; }
};

/// Learning-rate groups.
enum class Group { embedding, backbone, head, base };
std::string to_string(Group g);
inline constexpr Group all_groups[] = {Group::embedding, Group::backbone, Group::head, Group::base};

struct Block {
  Row ln1_g, ln1_b;
  attn::AttentionParams<double> attn;
  Row ln2_g, ln2_b;
  Matrix w1;
  Row b1;
  Matrix w2;
  Row b2;
};

/// A named parameter tensor viewed as a flat span.
struct TensorView {
  std::string name;
  Group group;
  Eigen::Index rows;
  Eigen::Index cols;
  std::span<double> data;
};

/// Every trainable tensor of the forecaster. Gradients and optimizer moments
/// reuse the same layout.
struct ParamStore {
  Matrix embed_w;
  Row embed_b;
  Matrix pos_grid;  // N x 2 learnable coordinates
  Matrix pos_w;     // 2 x d
  std::vector<Block> blocks;
  Row norm_g, norm_b;
  Matrix head_w1;
  Row head_b1;
  Matrix head_w2;
  Row head_b2;
  Matrix alpha;  // 1 x 1

  /// Named views in a fixed order. Names are unique.
  std::vector<TensorView> tensors();
  std::size_t count() const;
  ParamStore zeros_like() const;
  double alpha_value() const { return alpha(0, 0); }
};

/// Truncated-normal weights (two-sigma cut) scaled by 1/sqrt(fan_in), zero
/// biases, unit norm gains, coordinate-initialised positional grid, alpha = 2.
ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Patch tokens: one row per patch in raster order; features run over
/// channels, then patch rows, then patch columns.
Matrix patchify(const Field& field);
/// Inverse layout of patchify for the given channel names.
Field unpatchify(const Matrix& tokens, const GridSpec& spec, const std::vector<std::string>& channel_names,
                 const std::vector<std::string>& units);

/// Everything the network consumes for one sample.
struct ModelInput {
  Matrix tokens;  // normalized, raster order
  reorder::SectorPermutation perm;
  std::vector<double> patch_elevation;  // metres
};

/// Builds tokens from the normalized field and the permutation and patch
/// elevations from the physical winds and terrain of the raw field.
ModelInput prepare_input(const Field& raw_input, const NormStats& stats, const ModelConfig& cfg);

struct ForwardOptions {
  bool training = false;        // enables dropout
  std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
};

struct BlockCache {
  Matrix z_in;
  Matrix ln1_xhat;
  Eigen::VectorXd ln1_rstd;
  Matrix attn_in;
  attn::AttentionCache<double> attn;
  Matrix drop1;  // dropout scale mask (empty when inactive)
  Matrix z_mid;
  Matrix ln2_xhat;
  Eigen::VectorXd ln2_rstd;
  Matrix mlp_in;
  Matrix pre_act;
  Matrix act;
  Matrix drop2;
};

struct ForwardCache {
  reorder::SectorPermutation perm;
  Matrix tokens_seq;
  Matrix pos_seq_grid;
  topo::ElevationBias elev;
  bool has_bias = false;
  Matrix bias_seq;
  std::vector<BlockCache> blocks;
  Matrix z_final;
  Matrix norm_xhat;
  Eigen::VectorXd norm_rstd;
  Matrix head_in;
  Matrix head_pre;
  Matrix head_act;
};

/// N x token_out predictions in raster patch order.
Matrix forward(const ModelInput& in, const ParamStore& params, const ModelConfig& cfg,
               const ForwardOptions& opts = {}, ForwardCache* cache = nullptr);

/// Accumulates d(loss)/d(params) into grads given d(loss)/d(output).
void backward(const Matrix& d_out, const ParamStore& params, const ModelConfig& cfg, const ForwardCache& cache,
              ParamStore& grads);

/// Predicted fields, one per horizon, each with out_channels channels.
std::vector<Field> predict_fields(const ModelInput& in, const ParamStore& params, const ModelConfig& cfg,
                                  const std::vector<std::string>& out_names, const std::vector<std::string>& units);

/// Head-averaged attention weights of one layer for diagnostics, in sequence order.
Matrix layer_attention(const ModelInput& in, const ParamStore& params, const ModelConfig& cfg, int layer);

}  // namespace topoflow::model
