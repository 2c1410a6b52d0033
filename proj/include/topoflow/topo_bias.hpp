#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "topoflow/fields.hpp"

namespace topoflow::topo {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double reference_height = 1000.0;  // m
inline constexpr double bias_min = -10.0;
inline constexpr double bias_max = 0.0;
inline constexpr double alpha_init = 2.0;

/// How the additive attention bias is derived from the pairwise penalty.
enum class BiasCombine {
  identity,         // bias = penalty
  row_correlation,  // bias = clamp(-(P P^T) / N)
};

/// Mean elevation of every p x p patch, raster patch order, in metres.
std::vector<double> patch_elevations(std::span<const float> elevation, const GridSpec& spec);
std::vector<double> patch_elevations(const Field& field, const GridSpec& spec);

struct ElevationBias {
  std::vector<double> elevations;  // per patch, m
  double alpha = alpha_init;
  BiasCombine combine = BiasCombine::identity;
  Matrix penalty;  // clamp(-alpha * relu((h_j - h_i) / h0), -10, 0)
  Matrix bias;     // what attention adds to its logits

  Eigen::Index size() const { return penalty.rows(); }
};

ElevationBias build_bias(std::span<const double> elevations, double alpha,
                         BiasCombine combine = BiasCombine::identity);

/// Entry-wise d(bias)/d(alpha). Zero where the clamp is active, including the
/// clamp boundary itself.
Matrix bias_gradient_alpha(const ElevationBias& b);

}  // namespace topoflow::topo
