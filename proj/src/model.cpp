#include "topoflow/model.hpp"

#include <cmath>
#include <numbers>

namespace topoflow::model {

namespace {

constexpr double ln_eps = 1e-5;

// ---- primitives --------------------------------------------------------------

Matrix layer_norm(const Matrix& x, const Row& g, const Row& b, Matrix& xhat, Eigen::VectorXd& rstd) {
  const auto d = static_cast<double>(x.cols());
  const Eigen::VectorXd mean = x.rowwise().mean();
  xhat = x.colwise() - mean;
  rstd = ((xhat.array().square().rowwise().sum() / d) + ln_eps).rsqrt();
  xhat = xhat.array().colwise() * rstd.array();
  Matrix y = xhat.array().rowwise() * g.array();
  y.rowwise() += b;
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Row& g, const Matrix& xhat, const Eigen::VectorXd& rstd, Row& dg,
                           Row& db) {
  const auto d = static_cast<double>(dy.cols());
  dg += (dy.array() * xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * g.array();
  const Eigen::VectorXd s1 = dxhat.rowwise().sum();
  const Eigen::VectorXd s2 = (dxhat.array() * xhat.array()).rowwise().sum();
  Matrix dx = (d * dxhat.array()).matrix();
  dx.colwise() -= s1;
  dx -= (xhat.array().colwise() * s2.array()).matrix();
  return (dx.array().colwise() * (rstd.array() / d)).matrix();
}

constexpr double gelu_k = 0.7978845608028654;  // sqrt(2/pi)
constexpr double gelu_c = 0.044715;

using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// tanh(u) written as 1 - 2 / (exp(2u) + 1) so the whole map vectorizes.
Array gelu_tanh(const Matrix& x) {
  const Array u = gelu_k * (x.array() + gelu_c * x.array().cube());
  return 1.0 - 2.0 / ((2.0 * u).exp() + 1.0);
}

Matrix gelu(const Matrix& x) { return (0.5 * x.array() * (1.0 + gelu_tanh(x))).matrix(); }

Matrix gelu_backward(const Matrix& dy, const Matrix& x) {
  const Array t = gelu_tanh(x);
  const auto v = x.array();
  return (dy.array() * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t.square()) * gelu_k * (1.0 + 3.0 * gelu_c * v.square())))
      .matrix();
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix m(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : 0.0;
  return m;
}

Matrix linear(const Matrix& x, const Matrix& w, const Row& b) {
  Matrix y = x * w;
  y.rowwise() += b;
  return y;
}

void check_finite(const Matrix& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite activations in " + where);
}

// Reindex the raster elevation bias (or its alpha-derivative) into sequence order.
Matrix to_sequence(const reorder::SectorPermutation& perm, const Matrix& raster) {
  return perm.is_identity() ? raster : reorder::apply_pairs(perm, raster);
}

/// Standard deviation of a unit normal cut at two sigma.
constexpr double trunc_sd = 0.8796256610342398;

/// Normal cut at two sigma, rescaled so the draws have standard deviation `stddev`.
void trunc_normal(Matrix& m, Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  m.resize(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double z;
    do {
      z = nd(rng);
    } while (std::abs(z) > 2.0);
    m.data()[i] = z / trunc_sd * stddev;
  }
}

}  // namespace

// ---- config / params -----------------------------------------------------------

void ModelConfig::validate() const {
  spec.validate();
  if (d <= 0 || heads <= 0 || d % heads != 0) throw ConfigError("model.d must be a positive multiple of model.heads");
  if (layers < 0 || mlp <= 0 || head_hidden < 0) throw ConfigError("model layer sizes must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (in_channels <= 0 || out_channels <= 0 || horizons <= 0) throw ConfigError("channel and horizon counts must be positive");
}

std::string to_string(Group g) {
  switch (g) {
    case Group::embedding: return "embedding";
    case Group::backbone: return "backbone";
    case Group::head: return "head";
    case Group::base: return "base";
  }
  return "base";
}

std::vector<TensorView> ParamStore::tensors() {
  std::vector<TensorView> out;
  auto add = [&](std::string name, Group g, auto& t) {
    out.push_back({std::move(name), g, t.rows(), t.cols(), std::span<double>(t.data(), static_cast<std::size_t>(t.size()))});
  };
  add("embed.w", Group::embedding, embed_w);
  add("embed.b", Group::embedding, embed_b);
  add("pos.grid", Group::embedding, pos_grid);
  add("pos.w", Group::embedding, pos_w);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    auto& b = blocks[l];
    const std::string pre = "block" + std::to_string(l) + ".";
    add(pre + "ln1.g", Group::backbone, b.ln1_g);
    add(pre + "ln1.b", Group::backbone, b.ln1_b);
    b.attn.for_each([&](const char* n, auto& t) { add(pre + "attn." + n, Group::backbone, t); });
    add(pre + "ln2.g", Group::backbone, b.ln2_g);
    add(pre + "ln2.b", Group::backbone, b.ln2_b);
    add(pre + "mlp.w1", Group::backbone, b.w1);
    add(pre + "mlp.b1", Group::backbone, b.b1);
    add(pre + "mlp.w2", Group::backbone, b.w2);
    add(pre + "mlp.b2", Group::backbone, b.b2);
  }
  add("norm.g", Group::base, norm_g);
  add("norm.b", Group::base, norm_b);
  add("head.w1", Group::head, head_w1);
  add("head.b1", Group::head, head_b1);
  add("head.w2", Group::head, head_w2);
  add("head.b2", Group::head, head_b2);
  add("alpha", Group::base, alpha);
  return out;
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& t : const_cast<ParamStore*>(this)->tensors()) n += t.data.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore z = *this;
  for (auto& t : z.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
  return z;
}

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const int d = cfg.d;
  const int n = cfg.spec.num_patches();
  ParamStore p;
  trunc_normal(p.embed_w, cfg.token_in(), d, 1.0 / std::sqrt(double(cfg.token_in())), rng);
  p.embed_b = Row::Zero(d);
  p.pos_grid.resize(n, 2);
  for (int k = 0; k < n; ++k) {
    p.pos_grid(k, 0) = (k % cfg.spec.patch_cols() + 0.5) / cfg.spec.patch_cols();
    p.pos_grid(k, 1) = (k / cfg.spec.patch_cols() + 0.5) / cfg.spec.patch_rows();
  }
  trunc_normal(p.pos_w, 2, d, 1.0 / std::sqrt(2.0), rng);
  for (int l = 0; l < cfg.layers; ++l) {
    Block b;
    b.ln1_g = Row::Ones(d);
    b.ln1_b = Row::Zero(d);
    b.attn = attn::AttentionParams<double>::zeros(d, cfg.heads);
    for (Matrix* w : {&b.attn.wq, &b.attn.wk, &b.attn.wv, &b.attn.wo}) trunc_normal(*w, d, d, 1.0 / std::sqrt(double(d)), rng);
    b.ln2_g = Row::Ones(d);
    b.ln2_b = Row::Zero(d);
    trunc_normal(b.w1, d, cfg.mlp, 1.0 / std::sqrt(double(d)), rng);
    b.b1 = Row::Zero(cfg.mlp);
    trunc_normal(b.w2, cfg.mlp, d, 1.0 / std::sqrt(double(cfg.mlp)), rng);
    b.b2 = Row::Zero(d);
    p.blocks.push_back(std::move(b));
  }
  p.norm_g = Row::Ones(d);
  p.norm_b = Row::Zero(d);
  trunc_normal(p.head_w1, d, cfg.hidden(), 1.0 / std::sqrt(double(d)), rng);
  p.head_b1 = Row::Zero(cfg.hidden());
  trunc_normal(p.head_w2, cfg.hidden(), cfg.token_out(), 1.0 / std::sqrt(double(cfg.hidden())), rng);
  p.head_b2 = Row::Zero(cfg.token_out());
  p.alpha = Matrix::Constant(1, 1, topo::alpha_init);
  return p;
}

// ---- layout ------------------------------------------------------------------

Matrix patchify(const Field& field) {
  const GridSpec& s = field.spec();
  const int p = s.patch;
  const auto nch = static_cast<int>(field.num_channels());
  Matrix t(s.num_patches(), nch * p * p);
  for (int pr = 0; pr < s.patch_rows(); ++pr)
    for (int pc = 0; pc < s.patch_cols(); ++pc) {
      const int k = pr * s.patch_cols() + pc;
      for (int ch = 0; ch < nch; ++ch)
        for (int r = 0; r < p; ++r)
          for (int c = 0; c < p; ++c) t(k, (ch * p + r) * p + c) = field.at(ch, pr * p + r, pc * p + c);
    }
  return t;
}

Field unpatchify(const Matrix& tokens, const GridSpec& spec, const std::vector<std::string>& channel_names,
                 const std::vector<std::string>& units) {
  const int p = spec.patch;
  const auto nch = static_cast<int>(channel_names.size());
  if (tokens.rows() != spec.num_patches() || tokens.cols() != nch * p * p)
    throw ShapeError("token matrix " + std::to_string(tokens.rows()) + "x" + std::to_string(tokens.cols()) +
                     " does not match " + std::to_string(spec.num_patches()) + "x" + std::to_string(nch * p * p));
  Field f(spec, channel_names, units);
  for (int pr = 0; pr < spec.patch_rows(); ++pr)
    for (int pc = 0; pc < spec.patch_cols(); ++pc) {
      const int k = pr * spec.patch_cols() + pc;
      for (int ch = 0; ch < nch; ++ch)
        for (int r = 0; r < p; ++r)
          for (int c = 0; c < p; ++c)
            f.at(ch, pr * p + r, pc * p + c) = static_cast<float>(tokens(k, (ch * p + r) * p + c));
    }
  return f;
}

ModelInput prepare_input(const Field& raw_input, const NormStats& stats, const ModelConfig& cfg) {
  if (!(raw_input.spec() == cfg.spec)) throw ShapeError("input grid does not match the model grid");
  if (static_cast<int>(raw_input.num_channels()) != cfg.in_channels)
    throw ShapeError("input has " + std::to_string(raw_input.num_channels()) + " channels, model expects " +
                     std::to_string(cfg.in_channels));
  ModelInput in;
  in.tokens = patchify(normalize(raw_input, stats));
  in.perm = cfg.wind_reorder ? reorder::build_permutation(raw_input, cfg.wind_mean)
                             : reorder::SectorPermutation::identity(cfg.spec);
  if (cfg.elev_bias) in.patch_elevation = topo::patch_elevations(raw_input, cfg.spec);
  return in;
}

// ---- forward / backward ----------------------------------------------------------

Matrix forward(const ModelInput& in, const ParamStore& params, const ModelConfig& cfg, const ForwardOptions& opts,
               ForwardCache* cache) {
  const auto n = static_cast<Eigen::Index>(cfg.spec.num_patches());
  if (in.tokens.rows() != n || in.tokens.cols() != cfg.token_in()) throw ShapeError("input tokens do not match config");
  if (in.perm.size() != static_cast<std::size_t>(n)) throw ShapeError("permutation size does not match patch count");
  const bool use_dropout = opts.training && cfg.dropout > 0.0;
  if (use_dropout && !opts.rng) throw ConfigError("dropout requires a random generator");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.perm = in.perm;
  const bool permuted = !in.perm.is_identity();
  c.tokens_seq = permuted ? reorder::apply(in.perm, in.tokens) : in.tokens;
  c.pos_seq_grid = (cfg.pos_follows_patch && permuted) ? reorder::apply(in.perm, params.pos_grid) : params.pos_grid;

  Matrix z = linear(c.tokens_seq, params.embed_w, params.embed_b);
  z.noalias() += c.pos_seq_grid * params.pos_w;
  check_finite(z, "embedding");

  c.has_bias = cfg.elev_bias;
  if (c.has_bias) {
    if (in.patch_elevation.size() != static_cast<std::size_t>(n)) throw ShapeError("patch elevations missing");
    c.elev = topo::build_bias(in.patch_elevation, params.alpha_value(), cfg.bias_combine);
    c.bias_seq = to_sequence(in.perm, c.elev.bias);
  }

  c.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const Block& b = params.blocks[l];
    BlockCache& bc = c.blocks[l];
    bc.z_in = z;
    bc.attn_in = layer_norm(z, b.ln1_g, b.ln1_b, bc.ln1_xhat, bc.ln1_rstd);
    Matrix a = attn::attend<double>(bc.attn_in, b.attn, c.has_bias ? &c.bias_seq : nullptr, nullptr, &bc.attn);
    if (use_dropout) {
      bc.drop1 = dropout_mask(a.rows(), a.cols(), cfg.dropout, *opts.rng);
      a.array() *= bc.drop1.array();
    } else {
      bc.drop1.resize(0, 0);
    }
    z += a;
    bc.z_mid = z;
    bc.mlp_in = layer_norm(z, b.ln2_g, b.ln2_b, bc.ln2_xhat, bc.ln2_rstd);
    bc.pre_act = linear(bc.mlp_in, b.w1, b.b1);
    bc.act = gelu(bc.pre_act);
    Matrix m = linear(bc.act, b.w2, b.b2);
    if (use_dropout) {
      bc.drop2 = dropout_mask(m.rows(), m.cols(), cfg.dropout, *opts.rng);
      m.array() *= bc.drop2.array();
    } else {
      bc.drop2.resize(0, 0);
    }
    z += m;
    check_finite(z, "block " + std::to_string(l));
  }

  c.z_final = z;
  c.head_in = layer_norm(z, params.norm_g, params.norm_b, c.norm_xhat, c.norm_rstd);
  c.head_pre = linear(c.head_in, params.head_w1, params.head_b1);
  c.head_act = gelu(c.head_pre);
  Matrix y = linear(c.head_act, params.head_w2, params.head_b2);
  check_finite(y, "prediction head");
  return permuted ? reorder::unapply(in.perm, y) : y;
}

void backward(const Matrix& d_out, const ParamStore& params, const ModelConfig& cfg, const ForwardCache& c,
              ParamStore& g) {
  const bool permuted = !c.perm.is_identity();
  const Matrix dy = permuted ? reorder::apply(c.perm, d_out) : d_out;

  // head
  g.head_w2.noalias() += c.head_act.transpose() * dy;
  g.head_b2 += dy.colwise().sum();
  const Matrix d_act = dy * params.head_w2.transpose();
  const Matrix d_pre = gelu_backward(d_act, c.head_pre);
  g.head_w1.noalias() += c.head_in.transpose() * d_pre;
  g.head_b1 += d_pre.colwise().sum();
  Matrix dz = layer_norm_backward(d_pre * params.head_w1.transpose(), params.norm_g, c.norm_xhat, c.norm_rstd,
                                  g.norm_g, g.norm_b);

  const Eigen::Index n = dy.rows();
  Matrix d_bias_seq;
  if (c.has_bias) d_bias_seq.setZero(n, n);

  for (std::size_t li = params.blocks.size(); li-- > 0;) {
    const Block& b = params.blocks[li];
    Block& gb = g.blocks[li];
    const BlockCache& bc = c.blocks[li];

    // z_out = z_mid + drop2 * (gelu(ln2(z_mid) w1 + b1) w2 + b2)
    Matrix dm = dz;
    if (bc.drop2.size() > 0) dm.array() *= bc.drop2.array();
    gb.w2.noalias() += bc.act.transpose() * dm;
    gb.b2 += dm.colwise().sum();
    const Matrix dpre = gelu_backward(dm * b.w2.transpose(), bc.pre_act);
    gb.w1.noalias() += bc.mlp_in.transpose() * dpre;
    gb.b1 += dpre.colwise().sum();
    dz += layer_norm_backward(dpre * b.w1.transpose(), b.ln2_g, bc.ln2_xhat, bc.ln2_rstd, gb.ln2_g, gb.ln2_b);

    // z_mid = z_in + drop1 * attend(ln1(z_in))
    Matrix da = dz;
    if (bc.drop1.size() > 0) da.array() *= bc.drop1.array();
    attn::AttentionGrads<double> ag{gb.attn, Matrix(), Matrix()};
    attn::attend_backward<double>(da, b.attn, bc.attn, ag, c.has_bias);
    gb.attn = std::move(ag.params);
    if (c.has_bias) d_bias_seq += ag.bias;
    dz += layer_norm_backward(ag.tokens, b.ln1_g, bc.ln1_xhat, bc.ln1_rstd, gb.ln1_g, gb.ln1_b);
  }

  // embedding and positional grid
  g.embed_w.noalias() += c.tokens_seq.transpose() * dz;
  g.embed_b += dz.colwise().sum();
  g.pos_w.noalias() += c.pos_seq_grid.transpose() * dz;
  Matrix d_grid = dz * params.pos_w.transpose();
  if (cfg.pos_follows_patch && permuted) d_grid = reorder::unapply(c.perm, d_grid);
  g.pos_grid += d_grid;

  if (c.has_bias) {
    const Matrix dbda = to_sequence(c.perm, topo::bias_gradient_alpha(c.elev));
    g.alpha(0, 0) += (d_bias_seq.array() * dbda.array()).sum();
  }
}

std::vector<Field> predict_fields(const ModelInput& in, const ParamStore& params, const ModelConfig& cfg,
                                  const std::vector<std::string>& out_names, const std::vector<std::string>& units) {
  if (static_cast<int>(out_names.size()) != cfg.out_channels) throw ShapeError("output channel names do not match config");
  const Matrix y = forward(in, params, cfg);
  const int pp = cfg.spec.patch * cfg.spec.patch;
  const int per_horizon = cfg.out_channels * pp;
  std::vector<Field> out;
  for (int h = 0; h < cfg.horizons; ++h)
    out.push_back(unpatchify(Matrix(y.middleCols(h * per_horizon, per_horizon)), cfg.spec, out_names, units));
  return out;
}

Matrix layer_attention(const ModelInput& in, const ParamStore& params, const ModelConfig& cfg, int layer) {
  if (layer < 0 || layer >= static_cast<int>(params.blocks.size())) throw ConfigError("layer index out of range");
  ForwardCache c;
  forward(in, params, cfg, {}, &c);
  const auto& w = c.blocks[static_cast<std::size_t>(layer)].attn.weights;
  Matrix avg = Matrix::Zero(w.front().rows(), w.front().cols());
  for (const auto& m : w) avg += m;
  return avg / static_cast<double>(w.size());
}

}  // namespace topoflow::model
