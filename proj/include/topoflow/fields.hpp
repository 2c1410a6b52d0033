#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "topoflow/error.hpp"

namespace topoflow {

/// Grid geometry: H x W cells cut into p x p patches, grouped into sectors of
/// sector_cols x sector_rows patches.
///
/// Row 0 is the southern edge; rows grow northward and columns grow eastward,
/// so a positive v wind moves mass toward larger row indices.
struct GridSpec {
  int height = 0;
  int width = 0;
  int patch = 1;
  int sector_cols = 1;
  int sector_rows = 1;

  /// Throws ConfigError if any divisibility invariant fails.
  void validate() const;

  int patch_rows() const { return height / patch; }
  int patch_cols() const { return width / patch; }
  int num_patches() const { return patch_rows() * patch_cols(); }
  int patches_per_sector() const { return sector_cols * sector_rows; }
  int num_sectors() const { return num_patches() / patches_per_sector(); }
  int sectors_across() const { return patch_cols() / sector_cols; }
  int sectors_down() const { return patch_rows() / sector_rows; }
  std::size_t cells() const { return static_cast<std::size_t>(height) * width; }

  bool operator==(const GridSpec&) const = default;
};

/// Multichannel gridded data, channel-major then row-major, 32-bit values.
class Field {
 public:
  Field() = default;
  Field(GridSpec spec, std::vector<std::string> channels, std::vector<std::string> units,
        std::vector<float> data);
  /// Zero-filled field.
  Field(GridSpec spec, std::vector<std::string> channels, std::vector<std::string> units);

  const GridSpec& spec() const { return spec_; }
  const std::vector<std::string>& channels() const { return channels_; }
  const std::vector<std::string>& units() const { return units_; }
  std::size_t num_channels() const { return channels_.size(); }
  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  /// Index of a named channel; throws DataError when absent.
  std::size_t channel_index(const std::string& name) const;
  bool has_channel(const std::string& name) const;

  std::span<const float> channel(std::size_t c) const;
  std::span<float> channel(std::size_t c);
  std::span<const float> channel(const std::string& name) const { return channel(channel_index(name)); }

  float at(std::size_t c, int row, int col) const {
    return data_[(c * spec_.height + row) * spec_.width + col];
  }
  float& at(std::size_t c, int row, int col) { return data_[(c * spec_.height + row) * spec_.width + col]; }

  /// New single- or multi-channel field holding the named channels in order.
  Field select(const std::vector<std::string>& names) const;

  /// Rejects non-finite values; throws DataError naming the channel.
  void check_finite() const;

  bool operator==(const Field& o) const;

 private:
  void validate() const;

  GridSpec spec_;
  std::vector<std::string> channels_;
  std::vector<std::string> units_;
  std::vector<float> data_;
};

class LandMask {
 public:
  LandMask() = default;
  LandMask(GridSpec spec, std::vector<std::uint8_t> mask);
  /// Every cell set.
  static LandMask full(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  bool at(int row, int col) const { return mask_[static_cast<std::size_t>(row) * spec_.width + col] != 0; }
  std::size_t count() const;

  Field to_field() const;
  static LandMask from_field(const Field& f);

  bool operator==(const LandMask&) const = default;

 private:
  GridSpec spec_;
  std::vector<std::uint8_t> mask_;
};

enum class NormKind { zscore, minmax, none };

struct ChannelNorm {
  NormKind kind = NormKind::none;
  double a = 0.0;  // mean or lower bound
  double b = 1.0;  // std or upper bound

  static ChannelNorm zscore(double mean, double stddev) { return {NormKind::zscore, mean, stddev}; }
  static ChannelNorm minmax(double lo, double hi) { return {NormKind::minmax, lo, hi}; }
  static ChannelNorm identity() { return {}; }

  void validate(const std::string& channel) const;
  bool operator==(const ChannelNorm&) const = default;
};

/// Per-channel normalization statistics keyed by channel name.
struct NormStats {
  std::map<std::string, ChannelNorm> channels;

  const ChannelNorm& at(const std::string& name) const;
  /// Compute statistics of the requested kind for each named channel over a
  /// collection of fields (training split only).
  static NormStats fit(const std::vector<const Field*>& fields,
                       const std::map<std::string, NormKind>& kinds);

  std::string to_text() const;
  static NormStats from_text(const std::string& text);
  bool operator==(const NormStats&) const = default;
};

Field normalize(const Field& field, const NormStats& stats);
Field denormalize(const Field& field, const NormStats& stats);

/// [sin, cos] of hour-of-day then [sin, cos] of day-of-year.
std::array<double, 4> temporal_encoding(int hour, int doy);

struct Timestamp {
  int hour = 0;
  int doy = 1;
  bool operator==(const Timestamp&) const = default;
};

struct Sample {
  Field input;
  std::vector<Field> targets;  // one per lead time
  std::vector<int> lead_times; // hours
  Timestamp timestamp;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fixed input channel order: meteorology, pollutants, coordinates, statics,
/// temporal encodings. Models index channels positionally.
namespace channels {
inline constexpr const char* wind_u = "u";
inline constexpr const char* wind_v = "v";
inline constexpr const char* tracer = "tracer";
inline constexpr const char* coord_y = "coord_y";
inline constexpr const char* coord_x = "coord_x";
inline constexpr const char* elevation = "elevation";
inline constexpr const char* hour_sin = "hour_sin";
inline constexpr const char* hour_cos = "hour_cos";
inline constexpr const char* doy_sin = "doy_sin";
inline constexpr const char* doy_cos = "doy_cos";

const std::vector<std::string>& input_order();
const std::vector<std::string>& input_units();
/// Normalization kind for each input channel.
const std::map<std::string, NormKind>& input_norm_kinds();
}  // namespace channels

}  // namespace topoflow
