#include "topoflow/fields.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

namespace topoflow {

void GridSpec::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid grid: " + m); };
  if (height <= 0 || width <= 0) fail("height and width must be positive");
  if (patch <= 0 || sector_cols <= 0 || sector_rows <= 0) fail("patch and sector sizes must be positive");
  if (height % patch != 0 || width % patch != 0) fail("patch size must divide height and width");
  if (patch_rows() % sector_rows != 0) fail("sector_rows must divide the patch row count");
  if (patch_cols() % sector_cols != 0) fail("sector_cols must divide the patch column count");
}

// --- Field ------------------------------------------------------------------

Field::Field(GridSpec spec, std::vector<std::string> channels, std::vector<std::string> units,
             std::vector<float> data)
    : spec_(spec), channels_(std::move(channels)), units_(std::move(units)), data_(std::move(data)) {
  validate();
}

Field::Field(GridSpec spec, std::vector<std::string> channels, std::vector<std::string> units)
    : spec_(spec), channels_(std::move(channels)), units_(std::move(units)) {
  data_.assign(channels_.size() * spec_.cells(), 0.0f);
  validate();
}

void Field::validate() const {
  spec_.validate();
  if (units_.size() != channels_.size()) throw ShapeError("unit list length differs from channel list");
  if (data_.size() != channels_.size() * spec_.cells())
    throw ShapeError("field data length " + std::to_string(data_.size()) + " != channels x H x W");
  std::set<std::string> seen;
  for (const auto& c : channels_)
    if (!seen.insert(c).second) throw DataError("duplicate channel name '" + c + "'");
}

bool Field::has_channel(const std::string& name) const {
  return std::find(channels_.begin(), channels_.end(), name) != channels_.end();
}

std::size_t Field::channel_index(const std::string& name) const {
  auto it = std::find(channels_.begin(), channels_.end(), name);
  if (it == channels_.end()) throw DataError("missing channel '" + name + "'");
  return static_cast<std::size_t>(it - channels_.begin());
}

std::span<const float> Field::channel(std::size_t c) const {
  return std::span<const float>(data_).subspan(c * spec_.cells(), spec_.cells());
}

std::span<float> Field::channel(std::size_t c) {
  return std::span<float>(data_).subspan(c * spec_.cells(), spec_.cells());
}

Field Field::select(const std::vector<std::string>& names) const {
  std::vector<std::string> units;
  std::vector<float> data;
  data.reserve(names.size() * spec_.cells());
  for (const auto& n : names) {
    const auto c = channel_index(n);
    units.push_back(units_[c]);
    auto ch = channel(c);
    data.insert(data.end(), ch.begin(), ch.end());
  }
  return Field(spec_, names, std::move(units), std::move(data));
}

void Field::check_finite() const {
  for (std::size_t c = 0; c < channels_.size(); ++c)
    for (float x : channel(c))
      if (!std::isfinite(x)) throw DataError("non-finite value in channel '" + channels_[c] + "'");
}

bool Field::operator==(const Field& o) const {
  if (!(spec_ == o.spec_) || channels_ != o.channels_ || units_ != o.units_) return false;
  if (data_.size() != o.data_.size()) return false;
  // Bitwise comparison so that signed zeros count as distinct.
  return std::equal(data_.begin(), data_.end(), o.data_.begin(),
                    [](float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); });
}

// --- LandMask ---------------------------------------------------------------

LandMask::LandMask(GridSpec spec, std::vector<std::uint8_t> mask) : spec_(spec), mask_(std::move(mask)) {
  spec_.validate();
  if (mask_.size() != spec_.cells()) throw ShapeError("mask size != H x W");
  for (auto m : mask_)
    if (m > 1) throw DataError("land mask values must be 0 or 1");
  if (count() == 0) throw DataError("land mask has no cells set");
}

LandMask LandMask::full(const GridSpec& spec) { return LandMask(spec, std::vector<std::uint8_t>(spec.cells(), 1)); }

std::size_t LandMask::count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

Field LandMask::to_field() const {
  std::vector<float> data(mask_.begin(), mask_.end());
  return Field(spec_, {"mask"}, {"1"}, std::move(data));
}

LandMask LandMask::from_field(const Field& f) {
  if (f.channels() != std::vector<std::string>{"mask"}) throw DataError("land mask file must hold one channel named 'mask'");
  std::vector<std::uint8_t> m;
  m.reserve(f.data().size());
  for (float x : f.data()) {
    if (x != 0.0f && x != 1.0f) throw DataError("land mask values must be 0 or 1");
    m.push_back(x == 1.0f ? 1 : 0);
  }
  return LandMask(f.spec(), std::move(m));
}

// --- Normalization ----------------------------------------------------------

void ChannelNorm::validate(const std::string& channel) const {
  if (kind == NormKind::zscore && !(b > 0.0))
    throw ConfigError("invalid stats for '" + channel + "': zscore sigma must be > 0");
  if (kind == NormKind::minmax && !(b > a))
    throw ConfigError("invalid stats for '" + channel + "': minmax requires hi > lo");
}

const ChannelNorm& NormStats::at(const std::string& name) const {
  auto it = channels.find(name);
  if (it == channels.end()) throw ConfigError("no normalization stats for channel '" + name + "'");
  return it->second;
}

NormStats NormStats::fit(const std::vector<const Field*>& fields, const std::map<std::string, NormKind>& kinds) {
  NormStats out;
  for (const auto& [name, kind] : kinds) {
    double sum = 0.0, sumsq = 0.0, lo = INFINITY, hi = -INFINITY;
    std::size_t n = 0;
    for (const Field* f : fields) {
      if (!f->has_channel(name)) continue;
      for (float x : f->channel(name)) {
        sum += x;
        sumsq += static_cast<double>(x) * x;
        lo = std::min(lo, static_cast<double>(x));
        hi = std::max(hi, static_cast<double>(x));
        ++n;
      }
    }
    if (n == 0) throw ConfigError("cannot fit stats: no data for channel '" + name + "'");
    ChannelNorm cn;
    switch (kind) {
      case NormKind::zscore: {
        const double mean = sum / n;
        const double var = std::max(0.0, sumsq / n - mean * mean);
        cn = ChannelNorm::zscore(mean, var > 0.0 ? std::sqrt(var) : 1.0);
        break;
      }
      case NormKind::minmax:
        cn = ChannelNorm::minmax(lo, hi > lo ? hi : lo + 1.0);
        break;
      case NormKind::none:
        break;
    }
    out.channels[name] = cn;
  }
  return out;
}

namespace {
const char* kind_name(NormKind k) {
  switch (k) {
    case NormKind::zscore: return "zscore";
    case NormKind::minmax: return "minmax";
    case NormKind::none: return "none";
  }
  return "none";
}
}  // namespace

std::string NormStats::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& [name, cn] : channels) os << name << ' ' << kind_name(cn.kind) << ' ' << cn.a << ' ' << cn.b << '\n';
  return os.str();
}

NormStats NormStats::from_text(const std::string& text) {
  NormStats out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, kind;
    ChannelNorm cn;
    if (!(ls >> name >> kind >> cn.a >> cn.b)) throw ConfigError("malformed stats line: " + line);
    if (kind == "zscore") cn.kind = NormKind::zscore;
    else if (kind == "minmax") cn.kind = NormKind::minmax;
    else if (kind == "none") cn.kind = NormKind::none;
    else throw ConfigError("unknown normalization kind '" + kind + "'");
    cn.validate(name);
    out.channels[name] = cn;
  }
  return out;
}

namespace {
template <class Map>
Field map_channels(const Field& field, const NormStats& stats, Map&& map) {
  Field out = field;
  for (std::size_t c = 0; c < field.num_channels(); ++c) {
    const auto& name = field.channels()[c];
    const ChannelNorm& cn = stats.at(name);
    cn.validate(name);
    auto src = field.channel(c);
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(map(cn, static_cast<double>(src[i])));
  }
  return out;
}
}  // namespace

Field normalize(const Field& field, const NormStats& stats) {
  return map_channels(field, stats, [](const ChannelNorm& cn, double x) {
    switch (cn.kind) {
      case NormKind::zscore: return (x - cn.a) / cn.b;
      case NormKind::minmax: return (x - cn.a) / (cn.b - cn.a);
      case NormKind::none: return x;
    }
    return x;
  });
}

Field denormalize(const Field& field, const NormStats& stats) {
  return map_channels(field, stats, [](const ChannelNorm& cn, double x) {
    switch (cn.kind) {
      case NormKind::zscore: return x * cn.b + cn.a;
      case NormKind::minmax: return x * (cn.b - cn.a) + cn.a;
      case NormKind::none: return x;
    }
    return x;
  });
}

std::array<double, 4> temporal_encoding(int hour, int doy) {
  if (hour < 0 || hour > 23) throw DataError("hour must be in 0..23, got " + std::to_string(hour));
  if (doy < 1 || doy > 365) throw DataError("day of year must be in 1..365, got " + std::to_string(doy));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double ph = two_pi * hour / 24.0;
  const double pd = two_pi * doy / 365.0;
  return {std::sin(ph), std::cos(ph), std::sin(pd), std::cos(pd)};
}

void Sample::validate() const {
  if (targets.size() != lead_times.size()) throw ShapeError("one target field per lead time required");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!(targets[i].spec() == input.spec())) throw ShapeError("target grid differs from input grid");
    if (i > 0 && lead_times[i] <= lead_times[i - 1]) throw DataError("lead times must be strictly increasing");
  }
}

namespace channels {

const std::vector<std::string>& input_order() {
  static const std::vector<std::string> order{wind_u,  wind_v,    tracer,   coord_y,  coord_x,
                                              elevation, hour_sin, hour_cos, doy_sin, doy_cos};
  return order;
}

const std::vector<std::string>& input_units() {
  static const std::vector<std::string> units{"m/s", "m/s", "ug/m3", "1", "1", "m", "1", "1", "1", "1"};
  return units;
}

const std::map<std::string, NormKind>& input_norm_kinds() {
  static const std::map<std::string, NormKind> kinds{
      {wind_u, NormKind::zscore},    {wind_v, NormKind::zscore},  {tracer, NormKind::zscore},
      {coord_y, NormKind::none},     {coord_x, NormKind::none},   {elevation, NormKind::minmax},
      {hour_sin, NormKind::none},    {hour_cos, NormKind::none},  {doy_sin, NormKind::none},
      {doy_cos, NormKind::none},
  };
  return kinds;
}

}  // namespace channels

}  // namespace topoflow
