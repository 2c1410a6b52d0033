#pragma once

#include <span>
#include <string>
#include <vector>

#include "topoflow/fields.hpp"
#include "topoflow/model.hpp"

namespace topoflow::eval {

using model::Matrix;

/// Masked RMSE over all channels of pred/target (physical units).
double rmse(const Field& pred, const Field& target, const LandMask& mask);
double mae(const Field& pred, const Field& target, const LandMask& mask);
/// Masked Pearson correlation; throws DataError on zero variance.
double correlation(const Field& pred, const Field& target, const LandMask& mask);

/// Span forms over one H x W plane.
double rmse(std::span<const float> pred, std::span<const float> target, const LandMask& mask);
double mae(std::span<const float> pred, std::span<const float> target, const LandMask& mask);
double correlation(std::span<const float> pred, std::span<const float> target, const LandMask& mask);

inline constexpr int histogram_bins = 20;

struct AttnDiagnostics {
  std::vector<double> histogram;  // fraction of weights per bin over [0, 1]
  double mu = 0.0;                // mean of row-maximum weights
  std::vector<double> entropy;    // per query row, nats
  double mean_entropy = 0.0;
};

/// Throws DataError when a row is not stochastic within 1e-6.
AttnDiagnostics attn_diagnostics(const std::vector<Matrix>& weights);
std::string diagnostics_text(const AttnDiagnostics& d);

struct Cell {
  std::string channel;
  int horizon = 0;  // hours
  double rmse = 0.0;
  double mae = 0.0;
  double r = 0.0;
  std::size_t n = 0;  // masked cells accumulated
};

struct MetricsReport {
  std::vector<std::string> channels;
  std::vector<int> horizons;
  std::vector<Cell> cells;  // channel-major

  const Cell& at(std::size_t channel, std::size_t horizon) const { return cells[channel * horizons.size() + horizon]; }
  double channel_average(std::size_t channel) const;
  double horizon_average(std::size_t horizon) const;
  /// Mean of the per-horizon averages.
  double overall() const;

  std::string to_text() const;
  std::string to_csv() const;
};

/// Pools squared and absolute errors over all samples for each
/// (channel, horizon); r is the Pearson correlation of the pooled masked cells.
MetricsReport report(const std::vector<Sample>& samples, const model::ParamStore& params,
                     const model::ModelConfig& cfg, const NormStats& stats, const LandMask& mask);

/// Same aggregation from precomputed denormalized predictions (one vector of
/// horizon fields per sample).
MetricsReport report_from_predictions(const std::vector<std::vector<Field>>& preds, const std::vector<Sample>& samples,
                                      const LandMask& mask);

}  // namespace topoflow::eval
