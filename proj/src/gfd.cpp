#include "topoflow/gfd.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace topoflow::gfd {

namespace {

constexpr char magic[4] = {'G', 'F', 'D', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
  if (s.size() > 0xffff) throw DataError("channel name or unit longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(const char* what) {
    const auto n = u16(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const Field& field) {
  const auto& s = field.spec();
  std::vector<std::uint8_t> out;
  out.reserve(32 + field.data().size() * 4);
  out.insert(out.end(), std::begin(magic), std::end(magic));
  put_u32(out, version);
  put_u32(out, static_cast<std::uint32_t>(field.num_channels()));
  for (int v : {s.height, s.width, s.patch, s.sector_cols, s.sector_rows}) put_u32(out, static_cast<std::uint32_t>(v));
  for (std::size_t c = 0; c < field.num_channels(); ++c) {
    put_string(out, field.channels()[c]);
    put_string(out, field.units()[c]);
  }
  for (float x : field.data()) put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

Field decode(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), magic, 4) != 0) throw FormatError("bad magic, expected GFD1", 0);
  r.take(4);
  const auto ver_pos = r.pos();
  if (r.u32("version") != version) throw FormatError("unsupported version", ver_pos);
  const auto nch = r.u32("channel count");
  GridSpec spec;
  const auto header_pos = r.pos();
  spec.height = static_cast<int>(r.u32("height"));
  spec.width = static_cast<int>(r.u32("width"));
  spec.patch = static_cast<int>(r.u32("patch size"));
  spec.sector_cols = static_cast<int>(r.u32("sector cols"));
  spec.sector_rows = static_cast<int>(r.u32("sector rows"));
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what(), header_pos);
  }
  std::vector<std::string> names, units;
  for (std::uint32_t c = 0; c < nch; ++c) {
    names.push_back(r.str("channel name"));
    units.push_back(r.str("channel unit"));
  }
  const std::size_t count = static_cast<std::size_t>(nch) * spec.cells();
  const auto payload_pos = r.pos();
  if (r.remaining() < count * 4) throw FormatError("truncated payload", payload_pos + r.remaining());
  if (r.remaining() > count * 4) throw FormatError("trailing bytes after payload", payload_pos + count * 4);
  auto payload = r.take(count * 4);
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(payload[4 * i + k]) << (8 * k);
    data[i] = std::bit_cast<float>(v);
    if (!std::isfinite(data[i])) throw FormatError("non-finite value in payload", payload_pos + 4 * i);
  }
  try {
    return Field(spec, std::move(names), std::move(units), std::move(data));
  } catch (const DataError& e) {
    throw FormatError(e.what(), header_pos);
  }
}

void write(const Field& field, const std::filesystem::path& path) {
  const auto bytes = encode(field);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

void write(const LandMask& mask, const std::filesystem::path& path) { write(mask.to_field(), path); }

Field read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

LandMask read_mask(const std::filesystem::path& path) { return LandMask::from_field(read(path)); }

}  // namespace topoflow::gfd
