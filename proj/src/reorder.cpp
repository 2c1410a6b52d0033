#include "topoflow/reorder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace topoflow::reorder {

double patch_wind_direction(std::span<const float> u, std::span<const float> v, WindMean mean) {
  if (u.size() != v.size() || u.empty()) throw ShapeError("wind region must be non-empty with matching u and v");
  double su = 0.0, sv = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double w = mean == WindMean::weighted ? std::hypot(double(u[i]), double(v[i])) : 1.0;
    su += w * u[i];
    sv += w * v[i];
    sw += mean == WindMean::weighted ? w : std::hypot(double(u[i]), double(v[i]));
  }
  if (sw == 0.0) return 0.0;
  return std::atan2(sv, su);
}

bool SectorPermutation::is_identity() const {
  for (std::size_t k = 0; k < forward.size(); ++k)
    if (forward[k] != static_cast<int>(k)) return false;
  return true;
}

SectorPermutation SectorPermutation::identity(const GridSpec& spec) {
  std::vector<int> f(static_cast<std::size_t>(spec.num_patches()));
  std::iota(f.begin(), f.end(), 0);
  auto p = from_forward(spec, std::move(f));
  p.sector_angle.assign(static_cast<std::size_t>(spec.num_sectors()), 0.0);
  p.sector_calm.assign(static_cast<std::size_t>(spec.num_sectors()), true);
  return p;
}

SectorPermutation SectorPermutation::from_forward(const GridSpec& spec, std::vector<int> forward) {
  SectorPermutation p;
  p.spec = spec;
  const auto n = forward.size();
  p.inverse.assign(n, -1);
  for (std::size_t k = 0; k < n; ++k) {
    const int j = forward[k];
    if (j < 0 || static_cast<std::size_t>(j) >= n || p.inverse[j] != -1)
      throw DataError("forward map is not a permutation of 0..N-1");
    p.inverse[j] = static_cast<int>(k);
  }
  p.forward = std::move(forward);
  return p;
}

std::vector<int> sector_patches(const GridSpec& spec, int sector) {
  const int sr = sector / spec.sectors_across(), sc = sector % spec.sectors_across();
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(spec.patches_per_sector()));
  for (int r = 0; r < spec.sector_rows; ++r)
    for (int c = 0; c < spec.sector_cols; ++c)
      out.push_back((sr * spec.sector_rows + r) * spec.patch_cols() + sc * spec.sector_cols + c);
  return out;
}

SectorPermutation build_permutation(const GridSpec& spec, std::span<const float> u, std::span<const float> v,
                                    WindMean mean, SortCounter* counter) {
  spec.validate();
  if (u.size() != spec.cells() || v.size() != spec.cells()) throw ShapeError("wind fields must cover the grid");
  const int K = spec.num_sectors();
  const int p = spec.patch;
  std::vector<int> forward;
  forward.reserve(static_cast<std::size_t>(spec.num_patches()));
  std::vector<double> angles(static_cast<std::size_t>(K));
  std::vector<bool> calm(static_cast<std::size_t>(K));
  std::vector<float> su, sv;
  for (int s = 0; s < K; ++s) {
    const auto patches = sector_patches(spec, s);
    // All cells of the sector.
    su.clear();
    sv.clear();
    for (int pi : patches) {
      const int pr = pi / spec.patch_cols(), pc = pi % spec.patch_cols();
      for (int r = pr * p; r < (pr + 1) * p; ++r)
        for (int c = pc * p; c < (pc + 1) * p; ++c) {
          su.push_back(u[static_cast<std::size_t>(r) * spec.width + c]);
          sv.push_back(v[static_cast<std::size_t>(r) * spec.width + c]);
        }
    }
    bool is_calm = true;
    for (std::size_t i = 0; i < su.size() && is_calm; ++i) is_calm = su[i] == 0.0f && sv[i] == 0.0f;
    const double theta = patch_wind_direction(su, sv, mean);
    angles[s] = theta;
    calm[s] = is_calm;
    if (is_calm) {
      forward.insert(forward.end(), patches.begin(), patches.end());
      continue;
    }
    struct Key {
      double proj;
      int raster;
    };
    std::vector<Key> keys;
    keys.reserve(patches.size());
    for (std::size_t k = 0; k < patches.size(); ++k) {
      const int lr = static_cast<int>(k) / spec.sector_cols, lc = static_cast<int>(k) % spec.sector_cols;
      const double x = (lc + 0.5) / spec.sector_cols, y = (lr + 0.5) / spec.sector_rows;
      keys.push_back({projection(x, y, theta), patches[k]});
    }
    std::stable_sort(keys.begin(), keys.end(), [counter](const Key& a, const Key& b) {
      if (counter) ++counter->comparisons;
      return a.proj < b.proj;
    });
    for (const auto& k : keys) forward.push_back(k.raster);
  }
  auto perm = SectorPermutation::from_forward(spec, std::move(forward));
  perm.sector_angle = std::move(angles);
  perm.sector_calm = std::move(calm);
  return perm;
}

SectorPermutation build_permutation(const Field& winds, WindMean mean, SortCounter* counter) {
  return build_permutation(winds.spec(), winds.channel(channels::wind_u), winds.channel(channels::wind_v), mean,
                           counter);
}

}  // namespace topoflow::reorder
