#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "topoflow/error.hpp"
#include "topoflow/reorder.hpp"

namespace topoflow::attn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Multi-head self-attention weights. Projections act on row tokens as
/// X * W + b; head h owns columns [h*dh, (h+1)*dh) of Q, K and V.
template <class T>
struct AttentionParams {
  int heads = 1;
  Mat<T> wq, wk, wv, wo;
  RowVec<T> bq, bk, bv, bo;

  int width() const { return static_cast<int>(wq.rows()); }
  int head_dim() const { return width() / heads; }

  void validate() const {
    const auto d = wq.rows();
    if (heads <= 0 || d % heads != 0) throw ShapeError("model width must be divisible by the head count");
    for (const Mat<T>* w : {&wq, &wk, &wv, &wo})
      if (w->rows() != d || w->cols() != d) throw ShapeError("projection matrices must be d x d");
    for (const RowVec<T>* b : {&bq, &bk, &bv, &bo})
      if (b->size() != d) throw ShapeError("projection biases must have length d");
  }

  static AttentionParams zeros(int d, int heads) {
    AttentionParams p;
    p.heads = heads;
    for (Mat<T>* w : {&p.wq, &p.wk, &p.wv, &p.wo}) w->setZero(d, d);
    for (RowVec<T>* b : {&p.bq, &p.bk, &p.bv, &p.bo}) b->setZero(d);
    return p;
  }

  /// Gaussian weights with standard deviation `scale`, zero biases.
  static AttentionParams random(int d, int heads, std::mt19937_64& rng, T scale) {
    AttentionParams p = zeros(d, heads);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Mat<T>* w : {&p.wq, &p.wk, &p.wv, &p.wo})
      for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = static_cast<T>(nd(rng)) * scale;
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    f("wq", wq); f("wk", wk); f("wv", wv); f("wo", wo);
    f("bq", bq); f("bk", bk); f("bv", bv); f("bo", bo);
  }
};

/// Forward intermediates kept for the backward pass.
template <class T>
struct AttentionCache {
  Mat<T> input;  // tokens (+ positional embedding)
  Mat<T> q, k, v;
  std::vector<Mat<T>> weights;  // per head, N x N, row-stochastic
  Mat<T> mixed;                 // concatenated head outputs before wo
};

template <class T>
struct AttentionGrads {
  AttentionParams<T> params;
  Mat<T> tokens;
  Mat<T> bias;  // summed over heads; only filled when requested
};

namespace detail {

template <class T>
void softmax_rows(Mat<T>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const T m = row.maxCoeff();
    if (!std::isfinite(static_cast<double>(m))) throw NumericError("non-finite attention logits");
    row = (row.array() - m).exp();
    row /= row.sum();
  }
}

}  // namespace detail

/// softmax(Q K^T / sqrt(dh) + bias) V per head, heads concatenated and output
/// projected. `pos` (N x d) is added to the tokens before the projections;
/// `bias` (N x N) is shared by all heads.
template <class T>
Mat<T> attend(const Mat<T>& tokens, const AttentionParams<T>& p, const Mat<T>* bias = nullptr,
              const Mat<T>* pos = nullptr, AttentionCache<T>* cache = nullptr) {
  p.validate();
  const Eigen::Index n = tokens.rows(), d = p.width();
  if (tokens.cols() != d) throw ShapeError("token width " + std::to_string(tokens.cols()) + " != model width");
  if (bias && (bias->rows() != n || bias->cols() != n)) throw ShapeError("attention bias must be N x N");
  if (pos && (pos->rows() != n || pos->cols() != d)) throw ShapeError("positional embedding must be N x d");

  AttentionCache<T> local;
  AttentionCache<T>& c = cache ? *cache : local;
  c.input = pos ? Mat<T>(tokens + *pos) : tokens;
  c.q.noalias() = c.input * p.wq;
  c.q.rowwise() += p.bq;
  c.k.noalias() = c.input * p.wk;
  c.k.rowwise() += p.bk;
  c.v.noalias() = c.input * p.wv;
  c.v.rowwise() += p.bv;

  const int dh = p.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  c.weights.resize(static_cast<std::size_t>(p.heads));
  c.mixed.resize(n, d);
  for (int h = 0; h < p.heads; ++h) {
    Mat<T>& s = c.weights[static_cast<std::size_t>(h)];
    s.noalias() = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose();
    s *= scale;
    if (bias) s += *bias;
    detail::softmax_rows(s);
    c.mixed.middleCols(h * dh, dh).noalias() = s * c.v.middleCols(h * dh, dh);
  }
  Mat<T> out = c.mixed * p.wo;
  out.rowwise() += p.bo;
  return out;
}

/// Accumulates parameter gradients into g.params and writes token (and
/// optionally bias) gradients. g.params must be zero-initialised by the caller
/// before the first accumulation.
template <class T>
void attend_backward(const Mat<T>& d_out, const AttentionParams<T>& p, const AttentionCache<T>& c,
                     AttentionGrads<T>& g, bool want_bias) {
  const Eigen::Index n = d_out.rows(), d = p.width();
  const int dh = p.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  g.params.wo.noalias() += c.mixed.transpose() * d_out;
  g.params.bo += d_out.colwise().sum();
  const Mat<T> d_mixed = d_out * p.wo.transpose();

  Mat<T> dq(n, d), dk(n, d), dv(n, d);
  if (want_bias) g.bias.setZero(n, n);
  Mat<T> da(n, n);
  for (int h = 0; h < p.heads; ++h) {
    const Mat<T>& a = c.weights[static_cast<std::size_t>(h)];
    const auto dmh = d_mixed.middleCols(h * dh, dh);
    da.noalias() = dmh * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = a.transpose() * dmh;
    // softmax backward: ds = a * (da - rowsum(a * da))
    const Eigen::Matrix<T, Eigen::Dynamic, 1> dots = (a.array() * da.array()).rowwise().sum();
    Mat<T> ds = (a.array() * (da.array().colwise() - dots.array())).matrix();
    if (want_bias) g.bias += ds;
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.params.wq.noalias() += c.input.transpose() * dq;
  g.params.wk.noalias() += c.input.transpose() * dk;
  g.params.wv.noalias() += c.input.transpose() * dv;
  g.params.bq += dq.colwise().sum();
  g.params.bk += dk.colwise().sum();
  g.params.bv += dv.colwise().sum();
  g.tokens.noalias() = dq * p.wq.transpose();
  g.tokens.noalias() += dk * p.wk.transpose();
  g.tokens.noalias() += dv * p.wv.transpose();
}

/// Head-averaged post-softmax weights.
template <class T>
Mat<T> attention_weights(const Mat<T>& tokens, const AttentionParams<T>& p, const Mat<T>* bias = nullptr,
                         const Mat<T>* pos = nullptr) {
  AttentionCache<T> c;
  attend(tokens, p, bias, pos, &c);
  Mat<T> avg = Mat<T>::Zero(tokens.rows(), tokens.rows());
  for (const auto& w : c.weights) avg += w;
  return avg / static_cast<T>(p.heads);
}

/// max |unapply(attend(apply(X))) - attend(X)| with no bias or positional terms.
template <class T>
T equivariance_check(const Mat<T>& tokens, const AttentionParams<T>& p, const reorder::SectorPermutation& perm) {
  const Mat<T> direct = attend(tokens, p);
  const Mat<T> permuted = reorder::apply(perm, tokens);
  const Mat<T> back = reorder::unapply(perm, attend(permuted, p));
  return (back - direct).cwiseAbs().maxCoeff();
}

/// As equivariance_check, with a bias and positional embedding given in
/// original patch indexing. When `co_permute` is true they are reindexed with
/// the tokens; otherwise they stay in original indexing on the permuted side.
template <class T>
T equivariance_check_with_terms(const Mat<T>& tokens, const AttentionParams<T>& p,
                                const reorder::SectorPermutation& perm, const Mat<T>* bias, const Mat<T>* pos,
                                bool co_permute) {
  const Mat<T> direct = attend(tokens, p, bias, pos);
  std::optional<Mat<T>> pb, pp;
  if (bias) pb = co_permute ? reorder::apply_pairs(perm, *bias) : *bias;
  if (pos) pp = co_permute ? reorder::apply(perm, *pos) : *pos;
  const Mat<T> back =
      reorder::unapply(perm, attend(Mat<T>(reorder::apply(perm, tokens)), p, pb ? &*pb : nullptr, pp ? &*pp : nullptr));
  return (back - direct).cwiseAbs().maxCoeff();
}

extern template Mat<float> attend(const Mat<float>&, const AttentionParams<float>&, const Mat<float>*,
                                  const Mat<float>*, AttentionCache<float>*);
extern template Mat<double> attend(const Mat<double>&, const AttentionParams<double>&, const Mat<double>*,
                                   const Mat<double>*, AttentionCache<double>*);
extern template void attend_backward(const Mat<double>&, const AttentionParams<double>&,
                                     const AttentionCache<double>&, AttentionGrads<double>&, bool);

}  // namespace topoflow::attn
