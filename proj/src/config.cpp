#include "topoflow/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace topoflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_num(const std::string& key, const std::string& s) {
  T out{};
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, out);
  if (r.ec != std::errc() || r.ptr != e) throw ConfigError("invalid value '" + s + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("invalid boolean '" + s + "' for " + key);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Key {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Key num(T RunConfig::*m) {
  return {[m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*m);
            else return std::to_string(c.*m);
          },
          [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_num<T>(k, v); }};
}

template <class T>
Key num_at(std::function<T&(RunConfig&)> ref) {
  return {[ref](const RunConfig& c) {
            T x = ref(const_cast<RunConfig&>(c));
            if constexpr (std::is_floating_point_v<T>) return fmt(x);
            else return std::to_string(x);
          },
          [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_num<T>(k, v); }};
}

Key flag_at(std::function<bool&(RunConfig&)> ref) {
  return {[ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_bool(k, v); }};
}

Key path_at(std::filesystem::path RunConfig::*m) {
  return {[m](const RunConfig& c) { return (c.*m).string(); },
          [m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; }};
}

Key lr_key(model::Group g) {
  return num_at<double>([g](RunConfig& c) -> double& { return c.train.lr[g]; });
}

#define NUM(T, expr) num_at<T>([](RunConfig& c) -> T& { return expr; })
#define FLAG(expr) flag_at([](RunConfig& c) -> bool& { return expr; })

const std::vector<std::pair<std::string, Key>>& table() {
  static const std::vector<std::pair<std::string, Key>> t = [] {
    std::vector<std::pair<std::string, Key>> k;
    k.emplace_back("seed", num(&RunConfig::seed));
    k.emplace_back("threads", num(&RunConfig::threads));
    k.emplace_back("paths.data", path_at(&RunConfig::data_dir));
    k.emplace_back("paths.out", path_at(&RunConfig::out_dir));
    k.emplace_back("paths.checkpoint", path_at(&RunConfig::checkpoint));

    k.emplace_back("grid.height", NUM(int, c.grid.height));
    k.emplace_back("grid.width", NUM(int, c.grid.width));
    k.emplace_back("grid.patch", NUM(int, c.grid.patch));
    k.emplace_back("grid.sector_cols", NUM(int, c.grid.sector_cols));
    k.emplace_back("grid.sector_rows", NUM(int, c.grid.sector_rows));

    k.emplace_back("physics.kappa", NUM(double, c.physics.kappa));
    k.emplace_back("physics.dt", NUM(double, c.physics.dt));
    k.emplace_back("physics.dx", NUM(double, c.physics.dx));
    k.emplace_back("physics.sink", NUM(double, c.physics.sink));
    k.emplace_back("physics.boundary",
                   Key{[](const RunConfig& c) {
                         return std::string(c.physics.boundary == synth::Boundary::periodic ? "periodic" : "clamped");
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         if (v == "periodic") c.physics.boundary = synth::Boundary::periodic;
                         else if (v == "clamped") c.physics.boundary = synth::Boundary::clamped;
                         else throw ConfigError("invalid value '" + v + "' for " + key + " (periodic|clamped)");
                       }});

    k.emplace_back("terrain.archetype",
                   Key{[](const RunConfig& c) {
                         return c.terrain.archetype ? synth::to_string(*c.terrain.archetype) : std::string("random");
                       },
                       [](RunConfig& c, const std::string&, const std::string& v) {
                         if (v == "random") c.terrain.archetype.reset();
                         else c.terrain.archetype = synth::archetype_from_string(v);
                       }});
    k.emplace_back("terrain.peak_elevation", NUM(double, c.terrain.peak_elevation));
    k.emplace_back("terrain.wind_direction",
                   Key{[](const RunConfig& c) {
                         return c.terrain.wind_direction ? fmt(*c.terrain.wind_direction) : std::string("random");
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         if (v == "random") c.terrain.wind_direction.reset();
                         else c.terrain.wind_direction = parse_num<double>(key, v);
                       }});
    k.emplace_back("wind.speed", NUM(double, c.terrain.wind.speed));
    k.emplace_back("wind.perturbation", NUM(double, c.terrain.wind.perturbation));
    k.emplace_back("wind.blocking", NUM(double, c.terrain.wind.blocking));
    k.emplace_back("wind.slope_scale", NUM(double, c.terrain.wind.slope_scale));
    k.emplace_back("wind.max_wind", NUM(double, c.terrain.wind.max_wind));
    k.emplace_back("wind.divergence_keep", NUM(double, c.terrain.wind.divergence_keep));

    k.emplace_back("data.count", NUM(std::size_t, c.count));
    k.emplace_back("data.horizons",
                   Key{[](const RunConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.horizons.size(); ++i) s += (i ? "," : "") + std::to_string(c.horizons[i]);
                         return s;
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         c.horizons.clear();
                         for (const auto& h : split(v, ',')) c.horizons.push_back(parse_num<int>(key, h));
                       }});
    k.emplace_back("data.hours_per_step", NUM(int, c.data.hours_per_step));
    k.emplace_back("data.vary_wind", FLAG(c.data.vary_wind));
    k.emplace_back("data.min_speed_fraction", NUM(double, c.data.min_speed_fraction));
    k.emplace_back("data.blobs", NUM(int, c.data.blobs));
    k.emplace_back("data.blob_amplitude", NUM(double, c.data.blob_amplitude));
    k.emplace_back("data.background", NUM(double, c.data.background));
    k.emplace_back("data.random_sources", NUM(int, c.data.random_sources));
    k.emplace_back("data.source_rate", NUM(double, c.data.source_rate));
    k.emplace_back("data.random_timestamp", FLAG(c.data.random_timestamp));
    k.emplace_back("data.val_fraction", NUM(double, c.val_fraction));
    k.emplace_back("data.test_fraction", NUM(double, c.test_fraction));
    k.emplace_back("data.mask_fraction", NUM(double, c.mask_fraction));

    k.emplace_back("model.d", NUM(int, c.model.d));
    k.emplace_back("model.layers", NUM(int, c.model.layers));
    k.emplace_back("model.heads", NUM(int, c.model.heads));
    k.emplace_back("model.mlp", NUM(int, c.model.mlp));
    k.emplace_back("model.head_hidden", NUM(int, c.model.head_hidden));
    k.emplace_back("model.dropout", NUM(double, c.model.dropout));
    k.emplace_back("model.wind_reorder", FLAG(c.model.wind_reorder));
    k.emplace_back("model.elev_bias", FLAG(c.model.elev_bias));
    k.emplace_back("model.pos_follows_patch", FLAG(c.model.pos_follows_patch));
    k.emplace_back("model.wind_mean",
                   Key{[](const RunConfig& c) {
                         return std::string(c.model.wind_mean == reorder::WindMean::weighted ? "weighted" : "plain");
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         if (v == "weighted") c.model.wind_mean = reorder::WindMean::weighted;
                         else if (v == "plain") c.model.wind_mean = reorder::WindMean::plain;
                         else throw ConfigError("invalid value '" + v + "' for " + key + " (weighted|plain)");
                       }});
    k.emplace_back("model.bias_combine",
                   Key{[](const RunConfig& c) {
                         return std::string(c.model.bias_combine == topo::BiasCombine::identity ? "identity"
                                                                                                 : "row_correlation");
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         if (v == "identity") c.model.bias_combine = topo::BiasCombine::identity;
                         else if (v == "row_correlation") c.model.bias_combine = topo::BiasCombine::row_correlation;
                         else throw ConfigError("invalid value '" + v + "' for " + key + " (identity|row_correlation)");
                       }});

    k.emplace_back("train.lr.base", lr_key(model::Group::base));
    k.emplace_back("train.lr.embedding", lr_key(model::Group::embedding));
    k.emplace_back("train.lr.backbone", lr_key(model::Group::backbone));
    k.emplace_back("train.lr.head", lr_key(model::Group::head));
    k.emplace_back("train.weight_decay", NUM(double, c.train.weight_decay));
    k.emplace_back("train.beta1", NUM(double, c.train.beta1));
    k.emplace_back("train.beta2", NUM(double, c.train.beta2));
    k.emplace_back("train.eps", NUM(double, c.train.eps));
    k.emplace_back("train.warmup_steps", NUM(int, c.train.warmup_steps));
    k.emplace_back("train.total_steps", NUM(int, c.train.total_steps));
    k.emplace_back("train.lr_min", NUM(double, c.train.lr_min));
    k.emplace_back("train.clip_norm", NUM(double, c.train.clip_norm));
    k.emplace_back("train.batch_size", NUM(int, c.train.batch_size));
    k.emplace_back("train.epochs", NUM(int, c.train.epochs));
    k.emplace_back("train.patience", NUM(int, c.train.patience));
    k.emplace_back("train.val_interval", NUM(int, c.train.val_interval));
    k.emplace_back("train.per_channel_mean", FLAG(c.train.per_channel_mean));
    k.emplace_back("train.alpha_reset_step", NUM(int, c.train.alpha_reset_step));
    k.emplace_back("train.stop_after", NUM(int, c.train.stop_after));

    k.emplace_back("ablate.mode", Key{[](const RunConfig& c) { return c.ablate_mode; },
                                      [](RunConfig& c, const std::string& key, const std::string& v) {
                                        if (v != "component" && v != "tiles")
                                          throw ConfigError("invalid value '" + v + "' for " + key + " (component|tiles)");
                                        c.ablate_mode = v;
                                      }});
    k.emplace_back("ablate.seeds",
                   Key{[](const RunConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.ablate_seeds.size(); ++i)
                           s += (i ? "," : "") + std::to_string(c.ablate_seeds[i]);
                         return s;
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         c.ablate_seeds.clear();
                         for (const auto& x : split(v, ',')) c.ablate_seeds.push_back(parse_num<std::uint64_t>(key, x));
                       }});
    k.emplace_back("ablate.tiles",
                   Key{[](const RunConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.ablate_tiles.size(); ++i)
                           s += (i ? "," : "") + std::to_string(c.ablate_tiles[i].first) + "x" +
                                std::to_string(c.ablate_tiles[i].second);
                         return s;
                       },
                       [](RunConfig& c, const std::string& key, const std::string& v) {
                         c.ablate_tiles.clear();
                         for (const auto& x : split(v, ',')) {
                           const auto pos = x.find('x');
                           if (pos == std::string::npos) throw ConfigError("tile grid '" + x + "' must look like RxC");
                           c.ablate_tiles.emplace_back(parse_num<int>(key, x.substr(0, pos)),
                                                       parse_num<int>(key, x.substr(pos + 1)));
                         }
                       }});
    k.emplace_back("dump.layer", NUM(int, c.dump_layer));
    k.emplace_back("dump.sample", NUM(std::size_t, c.dump_sample));
    return k;
  }();
  return t;
}

#undef NUM
#undef FLAG

const Key& find(const std::string& key) {
  for (const auto& [name, k] : table())
    if (name == key) return k;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

RunConfig::RunConfig() {
  // Desk-scale schedule: fits a single CPU core in minutes.
  train.warmup_steps = 200;
  train.total_steps = 2000;
  train.val_interval = 100;
}

void RunConfig::set(const std::string& key, const std::string& value) { find(key).set(*this, key, trim(value)); }

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, key] : table()) out.push_back(name);
    return out;
  }();
  return k;
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  apply_text(ss.str(), path.string());
}

void RunConfig::finalize() {
  grid.validate();
  model.spec = grid;
  model.in_channels = static_cast<int>(channels::input_order().size());
  model.out_channels = 1;
  model.horizons = static_cast<int>(horizons.size());
  train.seed = seed;
  physics.validate();
  model.validate();
  train.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (horizons.empty()) throw ConfigError("data.horizons must not be empty");
  for (std::size_t i = 1; i < horizons.size(); ++i)
    if (horizons[i] <= horizons[i - 1]) throw ConfigError("data.horizons must be strictly increasing");
  if (val_fraction <= 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0)
    throw ConfigError("data.val_fraction/test_fraction must leave a training split");
  if (mask_fraction <= 0.0 || mask_fraction > 1.0) throw ConfigError("data.mask_fraction must be in (0, 1]");
  if (ablate_seeds.empty()) throw ConfigError("ablate.seeds must not be empty");
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  for (const auto& [name, k] : table()) os << name << " = " << k.get(*this) << '\n';
  return os.str();
}

std::uint64_t stream_seed(std::uint64_t root, std::uint64_t stream) {
  return synth::sample_seed(root ^ 0xD1B54A32D192ED03ULL, stream);
}

}  // namespace topoflow
