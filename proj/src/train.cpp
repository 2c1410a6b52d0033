#include "topoflow/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "topoflow/checkpoint.hpp"

namespace topoflow::train {

void TrainConfig::validate() const {
  if (warmup_steps < 0 || total_steps <= 0 || warmup_steps > total_steps)
    throw ConfigError("train: need 0 <= warmup_steps <= total_steps and total_steps > 0");
  for (const auto& [g, r] : lr)
    if (!(r > 0.0)) throw ConfigError("train: learning rate for group " + model::to_string(g) + " must be > 0");
  for (Group g : model::all_groups)
    if (!lr.contains(g)) throw ConfigError("train: missing learning rate for group " + model::to_string(g));
  if (!(lr_min > 0.0) || !(clip_norm > 0.0) || weight_decay < 0.0) throw ConfigError("train: invalid lr_min, clip or decay");
  if (batch_size <= 0 || val_interval <= 0 || patience < 0 || epochs <= 0)
    throw ConfigError("train: batch size, validation interval, epochs must be positive");
}

// --- loss -------------------------------------------------------------------

double masked_mse(std::span<const float> pred, std::span<const float> target, const LandMask& mask) {
  const std::size_t cells = mask.spec().cells();
  if (pred.size() != target.size() || cells == 0 || pred.size() % cells != 0)
    throw ShapeError("prediction, target and mask shapes differ");
  const double count = static_cast<double>(mask.count());
  if (count == 0.0) throw DataError("degenerate mask: no cells set");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask.mask()[i % cells]) continue;
    const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += e * e;
  }
  return acc / count;
}

double masked_mse(const std::vector<Field>& pred, const std::vector<Field>& target, const LandMask& mask) {
  if (pred.size() != target.size()) throw ShapeError("prediction and target horizon counts differ");
  double acc = 0.0;
  for (std::size_t h = 0; h < pred.size(); ++h) {
    if (!(pred[h].spec() == mask.spec()) || !(target[h].spec() == mask.spec())) throw ShapeError("grid mismatch");
    acc += masked_mse(pred[h].data(), target[h].data(), mask);
  }
  return acc;
}

double masked_mse_tokens(const Matrix& pred, const Matrix& target, const Matrix& mask_tok, double mask_count,
                         double extra_divisor, Matrix* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || mask_tok.rows() != pred.rows() ||
      mask_tok.cols() != pred.cols())
    throw ShapeError("prediction, target and mask token shapes differ");
  if (!(mask_count > 0.0)) throw DataError("degenerate mask: no cells set");
  const double denom = mask_count * extra_divisor;
  const Matrix err = (pred - target).cwiseProduct(mask_tok);
  if (grad) *grad = err * (2.0 / denom);
  return err.squaredNorm() / denom;
}

// --- schedule / optimizer -----------------------------------------------------------

double lr_at(std::int64_t step, const TrainConfig& cfg, Group group) {
  const double rate = cfg.lr.at(group);
  if (step < 0) throw ConfigError("negative step");
  if (step < cfg.warmup_steps) return rate * static_cast<double>(step) / cfg.warmup_steps;
  if (step >= cfg.total_steps) return cfg.lr_min;
  const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  const double progress = static_cast<double>(step - cfg.warmup_steps) / span;
  return cfg.lr_min + (rate - cfg.lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainState TrainState::fresh(const ParamStore& params, std::uint64_t seed) {
  TrainState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.rng.seed(seed);
  return s;
}

double global_norm(ParamStore& grads) {
  double sq = 0.0;
  for (const auto& t : grads.tensors())
    for (double g : t.data) sq += g * g;
  return std::sqrt(sq);
}

double optimize_step(ParamStore& params, ParamStore& grads, TrainState& state, const TrainConfig& cfg) {
  auto gv = grads.tensors();
  for (const auto& t : gv)
    for (double g : t.data)
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + t.name + "'; step aborted");
  const double norm = global_norm(grads);
  const double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

  auto pv = params.tensors();
  auto mv = state.m.tensors();
  auto vv = state.v.tensors();
  if (pv.size() != gv.size() || mv.size() != gv.size() || vv.size() != gv.size())
    throw ShapeError("gradient layout does not match parameters");
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i].data.size() != gv[i].data.size()) throw ShapeError("gradient shape mismatch for '" + pv[i].name + "'");
    const double lr = lr_at(state.step, cfg, pv[i].group);
    auto p = pv[i].data;
    auto g = gv[i].data;
    auto m = mv[i].data;
    auto v = vv[i].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] * clip;
      g[k] = gk;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      const double update = (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg.eps);
      p[k] -= lr * (update + cfg.weight_decay * p[k]);
    }
  }
  ++state.step;
  return norm;
}

// --- data ---------------------------------------------------------------------

Prepared prepare(const Sample& s, const NormStats& stats, const model::ModelConfig& cfg) {
  if (static_cast<int>(s.targets.size()) != cfg.horizons) throw ShapeError("sample horizon count != model horizons");
  Prepared p;
  p.input = model::prepare_input(s.input, stats, cfg);
  const int pp = cfg.spec.patch * cfg.spec.patch;
  const int per = cfg.out_channels * pp;
  p.target.resize(cfg.spec.num_patches(), cfg.token_out());
  for (int h = 0; h < cfg.horizons; ++h) {
    const Field& t = s.targets[static_cast<std::size_t>(h)];
    if (static_cast<int>(t.num_channels()) != cfg.out_channels) throw ShapeError("target channel count != model outputs");
    p.target.middleCols(h * per, per) = model::patchify(normalize(t, stats));
  }
  return p;
}

Matrix mask_tokens(const LandMask& mask, const model::ModelConfig& cfg) {
  const Matrix one = model::patchify(mask.to_field());
  const int per = static_cast<int>(one.cols());
  Matrix out(one.rows(), per * cfg.out_channels * cfg.horizons);
  for (int k = 0; k < cfg.out_channels * cfg.horizons; ++k) out.middleCols(k * per, per) = one;
  return out;
}

double validation_loss(const std::vector<Sample>& val, const ParamStore& params, const model::ModelConfig& mcfg,
                       const TrainConfig& tcfg, const NormStats& stats, const LandMask& mask) {
  if (val.empty()) throw ConfigError("validation split is empty");
  const Matrix mt = mask_tokens(mask, mcfg);
  const double count = static_cast<double>(mask.count());
  const double extra = tcfg.per_channel_mean ? double(mcfg.horizons * mcfg.out_channels) : 1.0;
  double acc = 0.0;
  for (const auto& s : val) {
    const Prepared p = prepare(s, stats, mcfg);
    const Matrix y = model::forward(p.input, params, mcfg);
    acc += masked_mse_tokens(y, p.target, mt, count, extra, nullptr);
  }
  return acc / static_cast<double>(val.size());
}

// --- fit ------------------------------------------------------------------------

namespace {

void append_log(const std::filesystem::path& dir, const LogEntry& e, bool truncate) {
  std::ofstream os(dir / "loss_log.txt", truncate ? std::ios::trunc : std::ios::app);
  if (truncate) os << "# step, train_loss, val_loss, lr_base, alpha\n";
  os << std::setprecision(9) << e.step << ", " << e.train_loss << ", " << e.val_loss << ", " << e.lr_base << ", "
     << e.alpha << '\n';
}

}  // namespace

std::string format_log(const std::vector<LogEntry>& log) {
  std::ostringstream os;
  os << "# step, train_loss, val_loss, lr_base, alpha\n" << std::setprecision(9);
  for (const auto& e : log) os << e.step << ", " << e.train_loss << ", " << e.val_loss << ", " << e.lr_base << ", " << e.alpha << '\n';
  return os.str();
}

FitResult fit(const std::vector<Sample>& train, const std::vector<Sample>& val, const LandMask& mask,
              const NormStats& stats, const model::ModelConfig& mcfg, const TrainConfig& tcfg,
              const FitOptions& opts) {
  mcfg.validate();
  tcfg.validate();
  if (train.empty() || val.empty()) throw ConfigError("fit needs non-empty train and validation splits");

  FitResult r;
  if (opts.resume) {
    if (!opts.resume_params || !opts.resume_best) throw ConfigError("resume needs parameters and best iterate");
    r.state = *opts.resume;
    r.params = *opts.resume_params;
    r.best_params = *opts.resume_best;
    r.log = opts.resume_log;
  } else {
    r.params = model::init_params(mcfg, tcfg.seed);
    r.best_params = r.params;
    r.state = TrainState::fresh(r.params, tcfg.seed ^ 0x9E3779B97F4A7C15ULL);
  }
  TrainState& st = r.state;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    std::ofstream os(*opts.out_dir / "loss_log.txt", std::ios::trunc);
    os << format_log(r.log);
  }

  const Matrix mt = mask_tokens(mask, mcfg);
  const double count = static_cast<double>(mask.count());
  const double extra = tcfg.per_channel_mean ? double(mcfg.horizons * mcfg.out_channels) : 1.0;
  const std::int64_t session_end =
      tcfg.stop_after > 0 ? std::min<std::int64_t>(tcfg.stop_after, tcfg.total_steps) : tcfg.total_steps;

  auto validate_now = [&]() {
    LogEntry e;
    e.step = st.step;
    e.train_loss = st.train_loss_count > 0 ? st.train_loss_acc / st.train_loss_count : 0.0;
    e.val_loss = validation_loss(val, r.params, mcfg, tcfg, stats, mask);
    e.lr_base = lr_at(st.step, tcfg, Group::base);
    e.alpha = r.params.alpha_value();
    st.train_loss_acc = 0.0;
    st.train_loss_count = 0;
    r.log.push_back(e);
    if (opts.out_dir) append_log(*opts.out_dir, e, false);
    if (opts.verbose)
      std::cerr << "step " << e.step << " train " << e.train_loss << " val " << e.val_loss << " alpha " << e.alpha << '\n';
    if (e.val_loss < st.best_val) {
      st.best_val = e.val_loss;
      st.bad_validations = 0;
      r.best_params = r.params;
    } else if (st.step > tcfg.warmup_steps) {
      ++st.bad_validations;
    }
    return e.val_loss;
  };

  ParamStore grads = r.params.zeros_like();
  model::ForwardCache cache;
  Matrix d_out;
  while (!st.finished && st.step < session_end) {
    if (st.order.empty() || st.cursor >= st.order.size()) {
      if (!st.order.empty()) ++st.epoch;
      if (st.epoch >= tcfg.epochs) {
        st.finished = true;
        break;
      }
      st.order.resize(train.size());
      std::iota(st.order.begin(), st.order.end(), std::size_t{0});
      std::shuffle(st.order.begin(), st.order.end(), st.rng);
      st.cursor = 0;
    }
    if (tcfg.alpha_reset_step >= 0 && st.step == tcfg.alpha_reset_step) {
      r.params.alpha(0, 0) = topo::alpha_init;
      st.m.alpha.setZero();
      st.v.alpha.setZero();
    }
    for (auto& t : grads.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
    const std::size_t batch_end = std::min(st.order.size(), st.cursor + static_cast<std::size_t>(tcfg.batch_size));
    const double bs = static_cast<double>(batch_end - st.cursor);
    double batch_loss = 0.0;
    for (std::size_t i = st.cursor; i < batch_end; ++i) {
      const Prepared p = prepare(train[st.order[i]], stats, mcfg);
      const Matrix y = model::forward(p.input, r.params, mcfg, {true, &st.rng}, &cache);
      batch_loss += masked_mse_tokens(y, p.target, mt, count, extra, &d_out);
      d_out /= bs;
      model::backward(d_out, r.params, mcfg, cache, grads);
    }
    st.cursor = batch_end;
    optimize_step(r.params, grads, st, tcfg);
    st.train_loss_acc += batch_loss / bs;
    ++st.train_loss_count;

    if (st.step % tcfg.val_interval == 0) {
      validate_now();
      if (st.bad_validations > tcfg.patience) {
        r.early_stopped = true;
        st.finished = true;
      }
    }
    if (st.step >= tcfg.total_steps) st.finished = true;
  }
  if (st.finished && (r.log.empty() || r.log.back().step != st.step)) validate_now();
  r.final_val = r.log.empty() ? validation_loss(val, r.params, mcfg, tcfg, stats, mask) : r.log.back().val_loss;

  if (opts.out_dir) {
    model::CheckpointInfo info{tcfg.seed, st.step, opts.config_echo};
    model::save_checkpoint(*opts.out_dir / "checkpoint.gfd", r.best_params, info);
    save_state(*opts.out_dir / "train_state.bin", r);
  }
  return r;
}

// --- state file -------------------------------------------------------------------

namespace {

constexpr char state_magic[4] = {'T', 'F', 'S', '1'};

struct Out {
  std::ofstream os;
  void raw(const void* p, std::size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void i64(std::int64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    raw(b, 8);
  }
  void f64(double d) { i64(std::bit_cast<std::int64_t>(d)); }
  void str(const std::string& s) {
    i64(static_cast<std::int64_t>(s.size()));
    raw(s.data(), s.size());
  }
  void store(ParamStore& p) {
    for (const auto& t : p.tensors()) {
      i64(static_cast<std::int64_t>(t.data.size()));
      for (double d : t.data) f64(d);
    }
  }
};

struct In {
  std::ifstream is;
  std::size_t pos = 0;
  void raw(void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw FormatError("truncated train state", pos);
    pos += n;
  }
  std::int64_t i64() {
    unsigned char b[8];
    raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<std::int64_t>(v);
  }
  double f64() { return std::bit_cast<double>(i64()); }
  std::string str() {
    const auto n = i64();
    if (n < 0 || n > (1 << 26)) throw FormatError("bad string length in train state", pos);
    std::string s(static_cast<std::size_t>(n), '\0');
    raw(s.data(), s.size());
    return s;
  }
  void store(ParamStore& p) {
    for (const auto& t : p.tensors()) {
      if (i64() != static_cast<std::int64_t>(t.data.size())) throw FormatError("tensor size mismatch for " + t.name, pos);
      for (double& d : t.data) d = f64();
    }
  }
};

}  // namespace

void save_state(const std::filesystem::path& path, const FitResult& r) {
  FitResult copy = r;
  Out o{std::ofstream(path, std::ios::binary | std::ios::trunc)};
  if (!o.os) throw DataError("cannot write '" + path.string() + "'");
  o.raw(state_magic, 4);
  const TrainState& s = copy.state;
  o.i64(s.step);
  o.f64(s.best_val);
  o.i64(s.bad_validations);
  o.i64(s.epoch);
  o.i64(static_cast<std::int64_t>(s.cursor));
  o.i64(s.finished ? 1 : 0);
  o.f64(s.train_loss_acc);
  o.i64(s.train_loss_count);
  o.i64(copy.early_stopped ? 1 : 0);
  o.i64(static_cast<std::int64_t>(s.order.size()));
  for (auto i : s.order) o.i64(static_cast<std::int64_t>(i));
  std::ostringstream rs;
  rs << s.rng;
  o.str(rs.str());
  o.i64(static_cast<std::int64_t>(copy.log.size()));
  for (const auto& e : copy.log) {
    o.i64(e.step);
    o.f64(e.train_loss);
    o.f64(e.val_loss);
    o.f64(e.lr_base);
    o.f64(e.alpha);
  }
  o.store(copy.params);
  o.store(copy.best_params);
  o.store(copy.state.m);
  o.store(copy.state.v);
  if (!o.os) throw DataError("write failed for '" + path.string() + "'");
}

FitResult load_state(const std::filesystem::path& path, const model::ModelConfig& mcfg) {
  In in{std::ifstream(path, std::ios::binary)};
  if (!in.is) throw DataError("cannot open '" + path.string() + "'");
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, state_magic, 4) != 0) throw FormatError("bad train state magic", 0);
  FitResult r;
  r.params = model::init_params(mcfg, 0);
  TrainState& s = r.state;
  s.step = in.i64();
  s.best_val = in.f64();
  s.bad_validations = static_cast<int>(in.i64());
  s.epoch = static_cast<int>(in.i64());
  s.cursor = static_cast<std::size_t>(in.i64());
  s.finished = in.i64() != 0;
  s.train_loss_acc = in.f64();
  s.train_loss_count = static_cast<int>(in.i64());
  r.early_stopped = in.i64() != 0;
  const auto n = in.i64();
  if (n < 0) throw FormatError("bad order length", in.pos);
  s.order.resize(static_cast<std::size_t>(n));
  for (auto& i : s.order) i = static_cast<std::size_t>(in.i64());
  std::istringstream rs(in.str());
  rs >> s.rng;
  const auto nlog = in.i64();
  for (std::int64_t k = 0; k < nlog; ++k) {
    LogEntry e;
    e.step = in.i64();
    e.train_loss = in.f64();
    e.val_loss = in.f64();
    e.lr_base = in.f64();
    e.alpha = in.f64();
    r.log.push_back(e);
  }
  r.best_params = r.params;
  s.m = r.params.zeros_like();
  s.v = r.params.zeros_like();
  in.store(r.params);
  in.store(r.best_params);
  in.store(s.m);
  in.store(s.v);
  r.final_val = r.log.empty() ? 0.0 : r.log.back().val_loss;
  return r;
}

// --- ablations ----------------------------------------------------------------------

std::vector<Variant> component_variants() {
  return {{"baseline", false, false, 0, 0}, {"+wind", true, false, 0, 0}, {"+wind+elev", true, true, 0, 0}};
}

std::vector<Variant> tile_variants(const std::vector<std::pair<int, int>>& grids) {
  std::vector<Variant> out{{"global", true, false, 1, 1}};
  for (auto [r, c] : grids) out.push_back({std::to_string(r) + "x" + std::to_string(c), true, false, r, c});
  return out;
}

model::ModelConfig apply_variant(const model::ModelConfig& base, const Variant& v) {
  model::ModelConfig c = base;
  c.wind_reorder = v.wind_reorder;
  c.elev_bias = v.elev_bias;
  if (v.tile_rows > 0 && v.tile_cols > 0) {
    if (c.spec.patch_rows() % v.tile_rows != 0 || c.spec.patch_cols() % v.tile_cols != 0)
      throw ConfigError("tile grid " + v.name + " does not divide the patch grid");
    c.spec.sector_rows = c.spec.patch_rows() / v.tile_rows;
    c.spec.sector_cols = c.spec.patch_cols() / v.tile_cols;
  }
  return c;
}

std::vector<AblationRow> ablation_run(const std::vector<Sample>& train, const std::vector<Sample>& val,
                                      const LandMask& mask, const NormStats& stats, const model::ModelConfig& mcfg,
                                      const TrainConfig& tcfg, const std::vector<Variant>& variants,
                                      const std::vector<std::uint64_t>& seeds, bool verbose) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (auto seed : seeds)
    for (const auto& v : variants) {
      const auto cfg = apply_variant(mcfg, v);
      // Sample grids carry the dataset's sector layout; only the model's view changes.
      auto retag = [&](const std::vector<Sample>& src) {
        std::vector<Sample> out;
        if (src.empty() || src.front().input.spec() == cfg.spec) return out;
        out.reserve(src.size());
        for (const auto& s : src) {
          Sample t = s;
          t.input = Field(cfg.spec, s.input.channels(), s.input.units(), s.input.data());
          for (auto& f : t.targets) f = Field(cfg.spec, f.channels(), f.units(), f.data());
          out.push_back(std::move(t));
        }
        return out;
      };
      const auto tr2 = retag(train);
      const auto va2 = retag(val);
      const LandMask m2 = mask.spec() == cfg.spec ? mask : LandMask(cfg.spec, mask.mask());
      TrainConfig tc = tcfg;
      tc.seed = seed;
      if (verbose) std::cerr << "ablation: variant " << v.name << " seed " << seed << '\n';
      const auto res = fit(tr2.empty() ? train : tr2, va2.empty() ? val : va2, m2, stats, cfg, tc, {});
      rows.push_back({v, seed, res.final_val, res.state.best_val, res.state.step});
      if (verbose) std::cerr << "  best " << res.state.best_val << " final " << res.final_val << '\n';
    }
  return rows;
}

std::vector<std::pair<std::string, double>> median_best(const std::vector<AblationRow>& rows) {
  std::vector<std::pair<std::string, double>> out;
  std::vector<std::string> names;
  for (const auto& r : rows)
    if (std::find(names.begin(), names.end(), r.variant.name) == names.end()) names.push_back(r.variant.name);
  for (const auto& n : names) {
    std::vector<double> v;
    for (const auto& r : rows)
      if (r.variant.name == n) v.push_back(r.best_val);
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    out.emplace_back(n, k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]));
  }
  return out;
}

namespace {

const Variant& variant_named(const std::vector<AblationRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.variant.name == name) return r.variant;
  throw ConfigError("unknown variant " + name);
}

}  // namespace

std::string component_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "model" << std::setw(16) << "scanning" << std::setw(12) << "wind_tiles"
     << std::setw(13) << "elevation" << "val_loss\n";
  for (const auto& [name, loss] : median_best(rows)) {
    const Variant& v = variant_named(rows, name);
    const std::string tiles = !v.wind_reorder ? "-" : (v.tile_rows > 0 ? std::to_string(v.tile_rows) + "x" + std::to_string(v.tile_cols) : "config");
    os << std::left << std::setw(14) << name << std::setw(16) << (v.wind_reorder ? "wind-directed" : "row-major")
       << std::setw(12) << tiles << std::setw(13) << (v.elev_bias ? "yes" : "no") << std::fixed << std::setprecision(6)
       << loss << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

std::string tile_table(const std::vector<AblationRow>& rows) {
  const auto med = median_best(rows);
  double global = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [n, l] : med)
    if (n == "global") global = l;
  std::ostringstream os;
  os << std::left << std::setw(12) << "strategy" << std::setw(10) << "tiles" << std::setw(12) << "loss" << "delta\n";
  for (const auto& [name, loss] : med) {
    const Variant& v = variant_named(rows, name);
    const bool is_global = name == "global";
    std::ostringstream delta;
    if (is_global || std::isnan(global)) delta << "---";
    else delta << std::showpos << std::fixed << std::setprecision(6) << (loss - global);
    os << std::left << std::setw(12) << (is_global ? "global" : "tiled") << std::setw(10)
       << (is_global ? "1x1" : std::to_string(v.tile_rows) + "x" + std::to_string(v.tile_cols)) << std::setw(12)
       << std::fixed << std::setprecision(6) << loss << delta.str() << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

std::string rows_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,seed,wind_reorder,elev_bias,tile_rows,tile_cols,final_val,best_val,steps\n" << std::setprecision(9);
  for (const auto& r : rows)
    os << r.variant.name << ',' << r.seed << ',' << r.variant.wind_reorder << ',' << r.variant.elev_bias << ','
       << r.variant.tile_rows << ',' << r.variant.tile_cols << ',' << r.final_val << ',' << r.best_val << ','
       << r.steps << '\n';
  return os.str();
}

}  // namespace topoflow::train
