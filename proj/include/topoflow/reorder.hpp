#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "topoflow/fields.hpp"

namespace topoflow::reorder {

enum class WindMean { weighted, plain };

/// Wind direction of a region in radians. `weighted` averages with weights
/// sqrt(u^2 + v^2); `plain` uses the arithmetic mean. Returns 0 when the
/// region is calm (zero total weight).
double patch_wind_direction(std::span<const float> u, std::span<const float> v, WindMean mean = WindMean::weighted);

/// Coordinate along the wind: x cos(theta) + y sin(theta).
inline double projection(double x, double y, double theta) { return x * std::cos(theta) + y * std::sin(theta); }

/// Sector-blocked patch permutation. forward[k] is the raster index of the
/// patch placed at sequence position k; inverse[forward[k]] == k.
struct SectorPermutation {
  GridSpec spec;
  std::vector<int> forward;
  std::vector<int> inverse;
  std::vector<double> sector_angle;  // radians, one per sector
  std::vector<bool> sector_calm;     // true where the sector had zero wind

  std::size_t size() const { return forward.size(); }
  bool is_identity() const;

  /// Raster order (wind reordering disabled).
  static SectorPermutation identity(const GridSpec& spec);
  /// Builds a permutation from an explicit forward map; throws DataError if
  /// it is not a bijection on 0..N-1.
  static SectorPermutation from_forward(const GridSpec& spec, std::vector<int> forward);
};

/// Raster patch indices covered by sector s, in raster order.
std::vector<int> sector_patches(const GridSpec& spec, int sector);

struct SortCounter {
  std::uint64_t comparisons = 0;
};

/// Per sector: direction from all sector cells, patches sorted by ascending
/// projection of their sector-local normalized centre, ties by raster index.
/// Sequence positions are the sectors concatenated in raster sector order.
/// Calm sectors keep raster order.
SectorPermutation build_permutation(const GridSpec& spec, std::span<const float> u, std::span<const float> v,
                                    WindMean mean = WindMean::weighted, SortCounter* counter = nullptr);
SectorPermutation build_permutation(const Field& winds, WindMean mean = WindMean::weighted,
                                    SortCounter* counter = nullptr);

/// Row k of the result is row forward[k] of the input.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> apply(
    const SectorPermutation& perm, const Eigen::MatrixBase<Derived>& tokens) {
  if (static_cast<std::size_t>(tokens.rows()) != perm.size())
    throw ShapeError("token count " + std::to_string(tokens.rows()) + " != permutation size " +
                     std::to_string(perm.size()));
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(tokens.rows(),
                                                                                              tokens.cols());
  for (Eigen::Index k = 0; k < tokens.rows(); ++k) out.row(k) = tokens.row(perm.forward[k]);
  return out;
}

/// Exact inverse of apply.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> unapply(
    const SectorPermutation& perm, const Eigen::MatrixBase<Derived>& tokens) {
  if (static_cast<std::size_t>(tokens.rows()) != perm.size())
    throw ShapeError("token count " + std::to_string(tokens.rows()) + " != permutation size " +
                     std::to_string(perm.size()));
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(tokens.rows(),
                                                                                              tokens.cols());
  for (Eigen::Index k = 0; k < tokens.rows(); ++k) out.row(perm.forward[k]) = tokens.row(k);
  return out;
}

/// Reindex an N x N pair matrix into sequence order: out(a, b) = m(forward[a], forward[b]).
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> apply_pairs(
    const SectorPermutation& perm, const Eigen::MatrixBase<Derived>& m) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  if (m.rows() != n || m.cols() != n) throw ShapeError("pair matrix must be N x N");
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) out(a, b) = m(perm.forward[a], perm.forward[b]);
  return out;
}

}  // namespace topoflow::reorder
