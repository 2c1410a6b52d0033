#include "topoflow/topo_bias.hpp"

#include <algorithm>
#include <cmath>

namespace topoflow::topo {

std::vector<double> patch_elevations(std::span<const float> elevation, const GridSpec& spec) {
  spec.validate();
  if (elevation.size() != spec.cells()) throw ShapeError("elevation channel must cover the grid");
  const int p = spec.patch;
  std::vector<double> out(static_cast<std::size_t>(spec.num_patches()), 0.0);
  for (int pr = 0; pr < spec.patch_rows(); ++pr)
    for (int pc = 0; pc < spec.patch_cols(); ++pc) {
      double sum = 0.0;
      for (int r = pr * p; r < (pr + 1) * p; ++r)
        for (int c = pc * p; c < (pc + 1) * p; ++c) sum += elevation[static_cast<std::size_t>(r) * spec.width + c];
      out[static_cast<std::size_t>(pr) * spec.patch_cols() + pc] = sum / (p * p);
    }
  return out;
}

std::vector<double> patch_elevations(const Field& field, const GridSpec& spec) {
  return patch_elevations(field.channel(channels::elevation), spec);
}

namespace {

double raw_penalty(double hi, double hj, double alpha) { return -alpha * std::max(0.0, (hj - hi) / reference_height); }

bool clamped(double raw) { return raw <= bias_min || raw >= bias_max; }

}  // namespace

ElevationBias build_bias(std::span<const double> elevations, double alpha, BiasCombine combine) {
  if (!std::isfinite(alpha)) throw NumericError("elevation bias scale alpha is not finite");
  const auto n = static_cast<Eigen::Index>(elevations.size());
  ElevationBias b;
  b.elevations.assign(elevations.begin(), elevations.end());
  b.alpha = alpha;
  b.combine = combine;
  b.penalty.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      b.penalty(i, j) = std::clamp(raw_penalty(elevations[i], elevations[j], alpha), bias_min, bias_max);
  if (combine == BiasCombine::identity) {
    b.bias = b.penalty;
  } else {
    b.bias = (-(b.penalty * b.penalty.transpose()) / static_cast<double>(n)).cwiseMax(bias_min).cwiseMin(bias_max);
  }
  return b;
}

Matrix bias_gradient_alpha(const ElevationBias& b) {
  const auto n = b.size();
  // d(penalty)/d(alpha): -relu(dh/h0) where the raw value lies strictly inside the clamp.
  Matrix dp(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double rel = std::max(0.0, (b.elevations[j] - b.elevations[i]) / reference_height);
      const double raw = -b.alpha * rel;
      dp(i, j) = (rel > 0.0 && !clamped(raw)) ? -rel : 0.0;
    }
  if (b.combine == BiasCombine::identity) return dp;
  Matrix raw_bias = -(b.penalty * b.penalty.transpose()) / static_cast<double>(n);
  Matrix g = -(dp * b.penalty.transpose() + b.penalty * dp.transpose()) / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (raw_bias(i, j) <= bias_min) g(i, j) = 0.0;
  return g;
}

}  // namespace topoflow::topo
