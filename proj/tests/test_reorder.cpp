#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "topoflow/reorder.hpp"

using namespace topoflow;
using namespace topoflow::reorder;

namespace {

constexpr double pi = std::numbers::pi;

struct Winds {
  std::vector<float> u, v;
};

Winds uniform(const GridSpec& s, float u, float v) { return {std::vector<float>(s.cells(), u), std::vector<float>(s.cells(), v)}; }

/// Brute-force reference: direction from raw sums, then repeated selection of
/// the smallest (projection, raster index) pair.
std::vector<int> oracle_forward(const GridSpec& s, const Winds& w) {
  std::vector<int> out;
  const int pc = s.patch_cols();
  for (int sr = 0; sr < s.sectors_down(); ++sr)
    for (int sc = 0; sc < s.sectors_across(); ++sc) {
      double su = 0, sv = 0, sw = 0;
      for (int r = sr * s.sector_rows * s.patch; r < (sr + 1) * s.sector_rows * s.patch; ++r)
        for (int c = sc * s.sector_cols * s.patch; c < (sc + 1) * s.sector_cols * s.patch; ++c) {
          const double u = w.u[r * s.width + c], v = w.v[r * s.width + c];
          const double m = std::hypot(u, v);
          su += m * u;
          sv += m * v;
          sw += m;
        }
      std::vector<std::pair<double, int>> items;
      for (int lr = 0; lr < s.sector_rows; ++lr)
        for (int lc = 0; lc < s.sector_cols; ++lc) {
          const int raster = (sr * s.sector_rows + lr) * pc + sc * s.sector_cols + lc;
          if (sw == 0.0) {
            items.emplace_back(0.0, raster);
          } else {
            const double theta = std::atan2(sv, su);
            items.emplace_back(projection((lc + 0.5) / s.sector_cols, (lr + 0.5) / s.sector_rows, theta), raster);
          }
        }
      std::vector<bool> used(items.size(), false);
      for (std::size_t k = 0; k < items.size(); ++k) {
        std::size_t best = items.size();
        for (std::size_t j = 0; j < items.size(); ++j) {
          if (used[j]) continue;
          if (best == items.size() || items[j].first < items[best].first ||
              (items[j].first == items[best].first && items[j].second < items[best].second))
            best = j;
        }
        used[best] = true;
        out.push_back(items[best].second);
      }
    }
  return out;
}

Winds random_winds(const GridSpec& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(-2.0f, 2.0f);
  Winds w{std::vector<float>(s.cells()), std::vector<float>(s.cells())};
  // Mix of smooth regional flow and cell noise; some sectors calm.
  const float bu = d(rng), bv = d(rng);
  for (std::size_t i = 0; i < s.cells(); ++i) {
    w.u[i] = bu + 0.5f * d(rng);
    w.v[i] = bv + 0.5f * d(rng);
  }
  if (rng() % 4 == 0) {
    const int sector = static_cast<int>(rng() % s.num_sectors());
    for (int p : sector_patches(s, sector))
      for (int r = 0; r < s.patch; ++r)
        for (int c = 0; c < s.patch; ++c) {
          const auto cell = static_cast<std::size_t>((p / s.patch_cols() * s.patch + r) * s.width + p % s.patch_cols() * s.patch + c);
          w.u[cell] = w.v[cell] = 0.0f;
        }
  }
  return w;
}

}  // namespace

TEST_CASE("wind direction") {
  const std::vector<float> one(4, 1.0f), zero(4, 0.0f), two(4, 2.0f);
  CHECK(patch_wind_direction(one, zero) == 0.0);
  CHECK(patch_wind_direction(zero, two) == doctest::Approx(pi / 2));
  CHECK(patch_wind_direction(std::vector<float>{1, 0}, std::vector<float>{0, 1}) == doctest::Approx(pi / 4));
  CHECK(patch_wind_direction(zero, zero) == 0.0);
  // Weighted and plain means differ when magnitudes differ.
  const std::vector<float> u{3, 0}, v{0, 1};
  CHECK(patch_wind_direction(u, v, WindMean::weighted) == doctest::Approx(std::atan2(1.0, 9.0)));
  CHECK(patch_wind_direction(u, v, WindMean::plain) == doctest::Approx(std::atan2(1.0, 3.0)));
  CHECK_THROWS_AS(patch_wind_direction(std::vector<float>{}, std::vector<float>{}), ShapeError);
}

TEST_CASE("projection") {
  CHECK(projection(0.3, 0.9, 0.0) == 0.3);
  CHECK(projection(0.3, 0.9, pi / 2) == doctest::Approx(0.9));
  CHECK(projection(0.5, 0.25, pi / 4) == doctest::Approx(0.75 * std::sqrt(2.0) / 2));
  CHECK(projection(0.5, 0.25, pi / 4) == doctest::Approx(0.5303).epsilon(1e-4));
}

TEST_CASE("uniform eastward wind orders each sector west to east") {
  GridSpec s{8, 8, 2, 2, 2};  // 4x4 patches, 2x2 patches per sector
  const auto w = uniform(s, 1.0f, 0.0f);
  const auto perm = build_permutation(s, w.u, w.v);
  // Sector 0 holds raster patches {0, 1, 4, 5}: column 0 (0, 4) then column 1 (1, 5).
  const std::vector<int> expect{0, 4, 1, 5, 2, 6, 3, 7, 8, 12, 9, 13, 10, 14, 11, 15};
  CHECK(perm.forward == expect);
  CHECK(perm.forward == oracle_forward(s, w));
}

TEST_CASE("northward wind keeps raster order, westward reverses columns") {
  GridSpec s{4, 4, 2, 2, 1};
  auto w = uniform(s, 0.0f, 1.0f);
  CHECK(build_permutation(s, w.u, w.v).is_identity());
  w = uniform(s, -1.0f, 0.0f);
  CHECK(build_permutation(s, w.u, w.v).forward == std::vector<int>{1, 0, 3, 2});
}

TEST_CASE("zero wind keeps raster order within each sector") {
  GridSpec s{16, 16, 2, 4, 2};
  const auto w = uniform(s, 0.0f, 0.0f);
  const auto perm = build_permutation(s, w.u, w.v);
  std::vector<int> expect;
  for (int k = 0; k < s.num_sectors(); ++k) {
    const auto sp = sector_patches(s, k);
    expect.insert(expect.end(), sp.begin(), sp.end());
  }
  CHECK(perm.forward == expect);
  CHECK(perm.forward == oracle_forward(s, w));
  for (bool c : perm.sector_calm) CHECK(c);
  // One sector covering the grid: global identity.
  GridSpec one{8, 8, 2, 4, 4};
  const auto w1 = uniform(one, 0.0f, 0.0f);
  CHECK(build_permutation(one, w1.u, w1.v).is_identity());
}

TEST_CASE("permutation matches brute-force oracle on 1000 random instances") {
  std::mt19937_64 rng(2024);
  const GridSpec specs[] = {{8, 8, 2, 2, 2}, {16, 32, 2, 4, 4}, {12, 24, 2, 3, 2}, {32, 64, 2, 8, 8}, {8, 16, 1, 4, 8}};
  int mismatches = 0, bad_inverse = 0, crossings = 0;
  for (int t = 0; t < 1000; ++t) {
    const GridSpec& s = specs[t % 5];
    const auto w = random_winds(s, rng);
    const auto perm = build_permutation(s, w.u, w.v);
    if (perm.forward != oracle_forward(s, w)) ++mismatches;
    for (std::size_t i = 0; i < perm.size(); ++i)
      if (perm.inverse[perm.forward[i]] != static_cast<int>(i) || perm.forward[perm.inverse[i]] != static_cast<int>(i))
        ++bad_inverse;
    const int m = s.patches_per_sector();
    for (int k = 0; k < s.num_sectors(); ++k) {
      const auto sp = sector_patches(s, k);
      for (int j = 0; j < m; ++j)
        if (std::find(sp.begin(), sp.end(), perm.forward[k * m + j]) == sp.end()) ++crossings;
    }
  }
  CHECK(mismatches == 0);
  CHECK(bad_inverse == 0);
  CHECK(crossings == 0);
}

TEST_CASE("permutation is deterministic") {
  GridSpec s{16, 32, 2, 4, 4};
  std::mt19937_64 rng(5);
  const auto w = random_winds(s, rng);
  const auto a = build_permutation(s, w.u, w.v);
  const auto b = build_permutation(s, w.u, w.v);
  CHECK(a.forward == b.forward);
  CHECK(a.sector_angle == b.sector_angle);
}

TEST_CASE("apply and unapply") {
  GridSpec s{2, 4, 2, 1, 1};  // N = 2
  const auto swap = SectorPermutation::from_forward(GridSpec{2, 4, 2, 2, 1}, {1, 0});
  Eigen::Matrix<double, -1, -1, Eigen::RowMajor> x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const auto y = apply(swap, x);
  CHECK(y(0, 0) == 4);
  CHECK(y(1, 2) == 3);
  CHECK(unapply(swap, y) == x);
  const auto id = SectorPermutation::identity(s);
  CHECK(apply(id, x) == x);
  CHECK_THROWS_AS(apply(swap, Eigen::MatrixXd(3, 1)), ShapeError);
  CHECK_THROWS_AS(SectorPermutation::from_forward(s, {0, 0}), DataError);

  std::mt19937_64 rng(9);
  GridSpec big{16, 16, 2, 4, 4};
  const auto w = random_winds(big, rng);
  const auto perm = build_permutation(big, w.u, w.v);
  const Eigen::MatrixXd t = Eigen::MatrixXd::Random(big.num_patches(), 5);
  CHECK(unapply(perm, apply(perm, t)) == t);
  const Eigen::MatrixXd pairs = Eigen::MatrixXd::Random(big.num_patches(), big.num_patches());
  const auto pp = apply_pairs(perm, pairs);
  CHECK(pp(3, 7) == pairs(perm.forward[3], perm.forward[7]));
}

TEST_CASE("sort work scales as K M log M") {
  std::mt19937_64 rng(1);
  auto work = [&](const GridSpec& s) {
    SortCounter cnt;
    const auto w = random_winds(s, rng);
    build_permutation(s, w.u, w.v, WindMean::weighted, &cnt);
    const double K = s.num_sectors(), M = s.patches_per_sector();
    return cnt.comparisons / (K * M * std::log2(M));
  };
  const double small = work({32, 64, 2, 4, 4});
  const double large = work({32, 64, 2, 8, 8});
  const double global = work({32, 64, 2, 32, 16});
  // Same constant within a small factor at every sector size.
  CHECK(small > 0.2);
  CHECK(small < 3.0);
  CHECK(large / small < 3.0);
  CHECK(global / small < 3.0);
}
