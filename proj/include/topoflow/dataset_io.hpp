#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topoflow/config.hpp"
#include "topoflow/fields.hpp"
#include "topoflow/synthdata.hpp"

namespace topoflow::data {

/// A generated dataset with its terrain, mask, training-split statistics
/// and contiguous train / validation / test splits.
struct Dataset {
  synth::TerrainWind terrain;
  LandMask mask;
  NormStats stats;
  std::vector<Sample> samples;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;

  std::vector<Sample> train() const { return slice(0, n_train); }
  std::vector<Sample> val() const { return slice(n_train, n_val); }
  std::vector<Sample> test() const { return slice(n_train + n_val, n_test); }

 private:
  std::vector<Sample> slice(std::size_t from, std::size_t n) const;
};

/// Smooth random region covering round(fraction * cells) cells: the
/// highest cells of a sum of broad Gaussian bumps, ties by raster index.
LandMask make_mask(const GridSpec& spec, std::uint64_t seed, double fraction);

/// Statistics of the input channels over the given samples.
NormStats fit_stats(const std::vector<Sample>& train);

/// Split sizes: validation and test rounded up, at least one training sample.
void split_counts(std::size_t count, double val_fraction, double test_fraction, std::size_t& n_train,
                  std::size_t& n_val, std::size_t& n_test);

Dataset generate(const RunConfig& cfg);

/// Writes samples/, terrain.gfd, mask.gfd, norm_stats.txt, config.txt and,
/// last, manifest.txt.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const std::string& config_echo);
/// Throws DataError when the manifest is missing or names absent files.
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace topoflow::data
