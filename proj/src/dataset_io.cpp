#include "topoflow/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "topoflow/gfd.hpp"

namespace topoflow::data {

std::vector<Sample> Dataset::slice(std::size_t from, std::size_t n) const {
  return {samples.begin() + static_cast<std::ptrdiff_t>(from), samples.begin() + static_cast<std::ptrdiff_t>(from + n)};
}

LandMask make_mask(const GridSpec& spec, std::uint64_t seed, double fraction) {
  spec.validate();
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("mask fraction must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int H = spec.height, W = spec.width;
  std::vector<double> score(spec.cells(), 0.0);
  for (int b = 0; b < 6; ++b) {
    const double cy = uni(rng) * H, cx = uni(rng) * W;
    const double sigma = (0.15 + 0.2 * uni(rng)) * std::min(H, W);
    const double amp = 0.5 + uni(rng);
    for (int r = 0; r < H; ++r)
      for (int c = 0; c < W; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        score[static_cast<std::size_t>(r) * W + c] += amp * std::exp(-d2 / (2 * sigma * sigma));
      }
  }
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * score.size())));
  std::vector<std::uint8_t> m(score.size(), 0);
  for (std::size_t k = 0; k < keep; ++k) m[idx[k]] = 1;
  return LandMask(spec, std::move(m));
}

NormStats fit_stats(const std::vector<Sample>& train) {
  if (train.empty()) throw DataError("cannot fit statistics on an empty training split");
  std::vector<const Field*> f;
  for (const auto& s : train) f.push_back(&s.input);
  return NormStats::fit(f, channels::input_norm_kinds());
}

void split_counts(std::size_t count, double val_fraction, double test_fraction, std::size_t& n_train,
                  std::size_t& n_val, std::size_t& n_test) {
  n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(count)));
  n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(count)));
  if (n_val + n_test >= count) throw ConfigError("data.count too small for the requested splits");
  n_train = count - n_val - n_test;
}

Dataset generate(const RunConfig& cfg) {
  Dataset ds;
  ds.terrain = synth::gen_terrain(cfg.grid, stream_seed(cfg.seed, streams::terrain), cfg.terrain);
  ds.mask = make_mask(cfg.grid, stream_seed(cfg.seed, streams::mask), cfg.mask_fraction);
  split_counts(cfg.count, cfg.val_fraction, cfg.test_fraction, ds.n_train, ds.n_val, ds.n_test);
  synth::DatasetOptions opts = cfg.data;
  opts.wind = cfg.terrain.wind;
  ds.samples = synth::make_dataset(cfg.grid, ds.terrain, cfg.physics, cfg.horizons, cfg.count,
                                   stream_seed(cfg.seed, streams::samples), opts, cfg.threads);
  ds.stats = fit_stats(ds.train());
  return ds;
}

namespace {

std::string sample_stem(std::size_t i) {
  std::ostringstream os;
  os << "samples/" << std::setw(6) << std::setfill('0') << i;
  return os.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw DataError("cannot write '" + p.string() + "'");
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Timestamp recover_timestamp(const Field& input) {
  const auto angle = [&](const char* s, const char* c) {
    double a = std::atan2(input.channel(s)[0], input.channel(c)[0]);
    if (a < 0) a += 2 * std::numbers::pi;
    return a / (2 * std::numbers::pi);
  };
  Timestamp t;
  t.hour = static_cast<int>(std::lround(angle(channels::hour_sin, channels::hour_cos) * 24)) % 24;
  t.doy = static_cast<int>(std::lround(angle(channels::doy_sin, channels::doy_cos) * 365)) % 365;
  if (t.doy == 0) t.doy = 365;
  return t;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const std::string& config_echo) {
  std::filesystem::create_directories(dir / "samples");
  std::filesystem::remove(dir / "manifest.txt");
  gfd::write(ds.terrain.to_field(), dir / "terrain.gfd");
  gfd::write(ds.mask, dir / "mask.gfd");
  write_text(dir / "norm_stats.txt", ds.stats.to_text());
  write_text(dir / "config.txt", config_echo);

  std::ostringstream man;
  man << "# input targets horizons seed\n";
  man << "# splits train=" << ds.n_train << " val=" << ds.n_val << " test=" << ds.n_test << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    const std::string stem = sample_stem(i);
    gfd::write(s.input, dir / (stem + "_in.gfd"));
    man << stem << "_in.gfd ";
    for (std::size_t h = 0; h < s.targets.size(); ++h) {
      const std::string t = stem + "_h" + std::to_string(s.lead_times[h]) + ".gfd";
      gfd::write(s.targets[h], dir / t);
      man << (h ? "," : "") << t;
    }
    man << ' ';
    for (std::size_t h = 0; h < s.lead_times.size(); ++h) man << (h ? "," : "") << s.lead_times[h];
    man << ' ' << s.seed << '\n';
  }
  write_text(dir / "manifest.txt", man.str());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.txt"))
    throw DataError("no manifest.txt in '" + dir.string() + "' (missing or incomplete dataset)");
  Dataset ds;
  ds.terrain = synth::TerrainWind::from_field(gfd::read(dir / "terrain.gfd"));
  ds.mask = gfd::read_mask(dir / "mask.gfd");
  ds.stats = NormStats::from_text(read_text(dir / "norm_stats.txt"));

  std::istringstream man(read_text(dir / "manifest.txt"));
  std::string line;
  bool have_splits = false;
  int lineno = 0;
  while (std::getline(man, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# splits", 0) == 0) {
        if (std::sscanf(line.c_str(), "# splits train=%zu val=%zu test=%zu", &ds.n_train, &ds.n_val, &ds.n_test) != 3)
          throw DataError("manifest.txt:" + std::to_string(lineno) + ": malformed split line");
        have_splits = true;
      }
      continue;
    }
    std::istringstream ls(line);
    std::string in, targets, horizons;
    std::uint64_t seed = 0;
    if (!(ls >> in >> targets >> horizons >> seed))
      throw DataError("manifest.txt:" + std::to_string(lineno) + ": expected 'input targets horizons seed'");
    Sample s;
    s.input = gfd::read(dir / in);
    s.seed = seed;
    std::istringstream ts(targets), hs(horizons);
    std::string item;
    while (std::getline(ts, item, ',')) s.targets.push_back(gfd::read(dir / item));
    while (std::getline(hs, item, ',')) {
      try {
        s.lead_times.push_back(std::stoi(item));
      } catch (const std::exception&) {
        throw DataError("manifest.txt:" + std::to_string(lineno) + ": bad horizon '" + item + "'");
      }
    }
    s.timestamp = recover_timestamp(s.input);
    s.validate();
    ds.samples.push_back(std::move(s));
  }
  if (!have_splits || ds.n_train + ds.n_val + ds.n_test != ds.samples.size())
    throw DataError("manifest split counts do not match its sample lines");
  return ds;
}

}  // namespace topoflow::data
