// Copyright 2026 The unitlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "unitlm/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "unitlm/error.hpp"
#include "unitlm/kernels.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

template <typename T>
std::span<const T> C(const std::vector<T>& v) {
  return v;
}

template <typename T>
void LayerNormForward(const T* x, const T* gain, const T* bias, T* out, T* mean,
                      T* rstd, int len, int d) {
  for (int i = 0; i < len; ++i) {
    const T* xi = x + std::size_t(i) * d;
    T mu = 0;
    for (int c = 0; c < d; ++c) mu += xi[c];
    mu /= T(d);
    T var = 0;
    for (int c = 0; c < d; ++c) var += (xi[c] - mu) * (xi[c] - mu);
    var /= T(d);
    const T r = T(1) / std::sqrt(var + T(kLayerNormEps));
    mean[i] = mu;
    rstd[i] = r;
    T* oi = out + std::size_t(i) * d;
    for (int c = 0; c < d; ++c) oi[c] = (xi[c] - mu) * r * gain[c] + bias[c];
  }
}

// dx is accumulated into; gain/bias gradients are accumulated when non-null.
template <typename T>
void LayerNormBackward(const T* x, const T* mean, const T* rstd, const T* gain,
                       const T* dy, T* dx, T* d_gain, T* d_bias, int len, int d) {
  std::vector<T> xhat(static_cast<std::size_t>(d));
  std::vector<T> dxhat(static_cast<std::size_t>(d));
  for (int i = 0; i < len; ++i) {
    const T* xi = x + std::size_t(i) * d;
    const T* dyi = dy + std::size_t(i) * d;
    T mean_dxhat = 0;
    T mean_dxhat_xhat = 0;
    for (int c = 0; c < d; ++c) {
      xhat[c] = (xi[c] - mean[i]) * rstd[i];
      dxhat[c] = dyi[c] * gain[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat[c];
      if (d_gain) d_gain[c] += dyi[c] * xhat[c];
      if (d_bias) d_bias[c] += dyi[c];
    }
    mean_dxhat /= T(d);
    mean_dxhat_xhat /= T(d);
    T* dxi = dx + std::size_t(i) * d;
    for (int c = 0; c < d; ++c) {
      dxi[c] += rstd[i] * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
    }
  }
}

template <typename T>
T Gelu(T x) {
  const T k = T(std::sqrt(2.0 / std::numbers::pi));
  return T(0.5) * x * (T(1) + std::tanh(k * (x + T(0.044715) * x * x * x)));
}

template <typename T>
T GeluGrad(T x) {
  const T k = T(std::sqrt(2.0 / std::numbers::pi));
  const T inner = k * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(inner);
  const T d_inner = k * (T(1) + T(3 * 0.044715) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * d_inner;
}

template <typename T>
void AddBiasRows(T* x, const T* bias, int len, int d) {
  for (int i = 0; i < len; ++i) {
    for (int c = 0; c < d; ++c) x[std::size_t(i) * d + c] += bias[c];
  }
}

template <typename T>
void ColumnSums(const T* x, T* out, int len, int d) {
  for (int i = 0; i < len; ++i) {
    for (int c = 0; c < d; ++c) out[c] += x[std::size_t(i) * d + c];
  }
}

// y[len x out] = x[len x in] * W^T, W stored [out x in].
template <typename T>
void Linear(std::span<const T> x, const Tensor<T>& w, std::span<T> y, int len) {
  kernels::MatMulNT<T>(x, w.span(), y, len, w.rows, w.cols, false);
}

// out += scale * (x A^T) B^T; mid receives x A^T.
template <typename T>
void LoraForward(std::span<const T> x, const Tensor<T>& a, const Tensor<T>& b,
                 T scale, std::vector<T>& mid, std::span<T> out, int len) {
  mid.assign(static_cast<std::size_t>(len) * a.rows, T(0));
  kernels::MatMulNT<T>(x, a.span(), mid, len, a.rows, a.cols, false);
  std::vector<T> delta(static_cast<std::size_t>(len) * b.rows);
  kernels::MatMulNT<T>(C(mid), b.span(), delta, len, b.rows, b.cols, false);
  for (std::size_t i = 0; i < delta.size(); ++i) out[i] += scale * delta[i];
}

// Backward of LoraForward for output gradient d_out; accumulates into d_x and,
// when grad is non-null, into the adapter gradients.
template <typename T>
void LoraBackward(std::span<const T> x, const Tensor<T>& a, const Tensor<T>& b,
                  T scale, const std::vector<T>& mid, std::span<const T> d_out,
                  std::span<T> d_x, Tensor<T>* grad_a, Tensor<T>* grad_b,
                  int len) {
  const int rank = a.rows;
  const int d_in = a.cols;
  const int d_outdim = b.rows;
  if (grad_b) {
    std::vector<T> tmp(static_cast<std::size_t>(d_outdim) * rank);
    kernels::MatMulTN<T>(d_out, C(mid), tmp, d_outdim, rank, len, false);
    for (std::size_t i = 0; i < tmp.size(); ++i) grad_b->data[i] += scale * tmp[i];
  }
  std::vector<T> d_mid(static_cast<std::size_t>(len) * rank);
  kernels::MatMulNN<T>(d_out, b.span(), d_mid, len, rank, d_outdim, false);
  for (T& v : d_mid) v *= scale;
  if (grad_a) {
    kernels::MatMulTN<T>(C(d_mid), x, grad_a->span(), rank, d_in, len, true);
  }
  kernels::MatMulNN<T>(C(d_mid), a.span(), d_x, len, d_in, rank, true);
}

template <typename T>
void FillNormal(Tensor<T>& t, Rng& rng, double stddev) {
  for (T& v : t.data) v = T(rng.Normal(0.0, stddev));
}

template <typename T>
void FillConstant(Tensor<T>& t, T value) {
  std::fill(t.data.begin(), t.data.end(), value);
}

}  // namespace

void ModelConfig::Validate() const {
  Require(layers > 0 && dim > 0 && heads > 0 && ffn_dim > 0 && max_len > 0 &&
              vocab_size > 0,
          "model config values must be positive");
  Require(dim % heads == 0, "model dim must be divisible by heads");
}

template <typename T>
ModelParams<T> ModelParams<T>::Zeros(const ModelConfig& cfg) {
  cfg.Validate();
  const int d = cfg.dim;
  ModelParams p;
  p.tok_emb = Tensor<T>("tok_emb", cfg.vocab_size, d);
  p.pos_emb = Tensor<T>("pos_emb", cfg.max_len, d);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".";
    LayerParams<T> lp;
    lp.ln1_gain = Tensor<T>(pre + "ln1.gain", 1, d);
    lp.ln1_bias = Tensor<T>(pre + "ln1.bias", 1, d);
    lp.wq = Tensor<T>(pre + "attn.wq", d, d);
    lp.wk = Tensor<T>(pre + "attn.wk", d, d);
    lp.wv = Tensor<T>(pre + "attn.wv", d, d);
    lp.wo = Tensor<T>(pre + "attn.wo", d, d);
    lp.ln2_gain = Tensor<T>(pre + "ln2.gain", 1, d);
    lp.ln2_bias = Tensor<T>(pre + "ln2.bias", 1, d);
    lp.w1 = Tensor<T>(pre + "ffn.w1", cfg.ffn_dim, d);
    lp.b1 = Tensor<T>(pre + "ffn.b1", 1, cfg.ffn_dim);
    lp.w2 = Tensor<T>(pre + "ffn.w2", d, cfg.ffn_dim);
    lp.b2 = Tensor<T>(pre + "ffn.b2", 1, d);
    p.layers.push_back(std::move(lp));
  }
  p.lnf_gain = Tensor<T>("lnf.gain", 1, d);
  p.lnf_bias = Tensor<T>("lnf.bias", 1, d);
  return p;
}

template <typename T>
std::size_t ModelParams<T>::Count() const {
  std::size_t n = 0;
  ForEach([&](const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
LoraParams<T> LoraParams<T>::Zeros(const ModelConfig& cfg, int rank, double alpha) {
  Require(rank >= 1, "LoRA rank must be at least 1");
  Require(alpha > 0, "LoRA alpha must be positive");
  LoraParams p;
  p.rank = rank;
  p.alpha = alpha;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "layers." + std::to_string(l) + ".attn.";
    LoraLayer<T> ll;
    ll.q_a = Tensor<T>(pre + "q_lora_a", rank, cfg.dim);
    ll.q_b = Tensor<T>(pre + "q_lora_b", cfg.dim, rank);
    ll.v_a = Tensor<T>(pre + "v_lora_a", rank, cfg.dim);
    ll.v_b = Tensor<T>(pre + "v_lora_b", cfg.dim, rank);
    p.layers.push_back(std::move(ll));
  }
  return p;
}

template <typename T>
LoraParams<T> LoraParams<T>::Init(const ModelConfig& cfg, int rank, double alpha,
                                  std::uint64_t seed) {
  LoraParams p = Zeros(cfg, rank, alpha);
  Rng rng(seed);
  const double std_a = 1.0 / std::sqrt(double(cfg.dim));
  for (auto& l : p.layers) {
    FillNormal(l.q_a, rng, std_a);
    FillNormal(l.v_a, rng, std_a);
  }
  return p;
}

template <typename T>
std::size_t LoraParams<T>::Count() const {
  std::size_t n = 0;
  ForEach([&](const Tensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& cfg, ModelParams<T> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.Validate();
  const auto expected = ModelParams<T>::Zeros(cfg_);
  Require(params_.layers.size() == expected.layers.size(),
          "parameter layer count does not match config");
  std::vector<std::pair<int, int>> shapes;
  expected.ForEach([&](const Tensor<T>& t) { shapes.emplace_back(t.rows, t.cols); });
  std::size_t i = 0;
  params_.ForEach([&](const Tensor<T>& t) {
    Require(t.rows == shapes[i].first && t.cols == shapes[i].second &&
                t.size() == std::size_t(t.rows) * t.cols,
            "parameter shape mismatch for " + t.name);
    ++i;
  });
}

template <typename T>
Transformer<T> Transformer<T>::Init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<T> p = ModelParams<T>::Zeros(cfg);
  Rng rng(Rng::Derive(seed, 1));
  const double out_std = kInitStd / std::sqrt(2.0 * cfg.layers);

  // Base-vocabulary rows come first; unit rows are appended by the same
  // expansion routine used on pretrained checkpoints.
  const int base_rows = std::min(cfg.vocab_size, kBaseVocabSize);
  EmbeddingMatrix base{base_rows, cfg.dim, {}};
  base.values.resize(static_cast<std::size_t>(base_rows) * cfg.dim);
  for (float& v : base.values) v = float(rng.Normal(0.0, kInitStd));
  const EmbeddingMatrix full =
      cfg.vocab_size > base_rows
          ? ExpandEmbeddings(base, cfg.vocab_size - base_rows,
                             Rng::Derive(seed, 2), kInitStd)
          : base;
  for (std::size_t i = 0; i < full.values.size(); ++i) {
    p.tok_emb.data[i] = T(full.values[i]);
  }

  FillNormal(p.pos_emb, rng, kInitStd / 2);
  for (auto& l : p.layers) {
    FillConstant(l.ln1_gain, T(1));
    FillConstant(l.ln2_gain, T(1));
    FillNormal(l.wq, rng, kInitStd);
    FillNormal(l.wk, rng, kInitStd);
    FillNormal(l.wv, rng, kInitStd);
    FillNormal(l.wo, rng, out_std);
    FillNormal(l.w1, rng, kInitStd);
    FillNormal(l.w2, rng, out_std);
  }
  FillConstant(p.lnf_gain, T(1));
  return Transformer(cfg, std::move(p));
}

template <typename T>
void Transformer<T>::CheckInput(std::span<const TokenId> ids) const {
  if (ids.empty()) Fail(ErrorKind::kInvalidArgument, "empty input sequence");
  if (int(ids.size()) > cfg_.max_len) {
    Fail(ErrorKind::kInvalidArgument,
         "input length " + std::to_string(ids.size()) + " exceeds max_len " +
             std::to_string(cfg_.max_len));
  }
  for (TokenId id : ids) {
    if (id < 0 || id >= cfg_.vocab_size) {
      Fail(ErrorKind::kInvalidArgument, "token id out of range: " + std::to_string(id));
    }
  }
}

template <typename T>
std::vector<T> Transformer<T>::Forward(std::span<const TokenId> ids,
                                       const LoraParams<T>* lora) const {
  ForwardCache<T> cache;
  return Forward(ids, lora, cache);
}

template <typename T>
std::vector<T> Transformer<T>::Forward(std::span<const TokenId> ids,
                                       const LoraParams<T>* lora,
                                       ForwardCache<T>& cache) const {
  CheckInput(ids);
  if (lora) {
    Require(lora->layers.size() == std::size_t(cfg_.layers),
            "adapter layer count does not match model");
  }
  const int len = int(ids.size());
  const int d = cfg_.dim;
  const int ffn = cfg_.ffn_dim;
  const std::size_t nd = std::size_t(len) * d;

  cache.ids.assign(ids.begin(), ids.end());
  cache.layers.resize(static_cast<std::size_t>(cfg_.layers));

  std::vector<T> x(nd);
  for (int i = 0; i < len; ++i) {
    const T* te = params_.tok_emb.row(ids[i]);
    const T* pe = params_.pos_emb.row(i);
    for (int c = 0; c < d; ++c) x[std::size_t(i) * d + c] = te[c] + pe[c];
  }

  for (int l = 0; l < cfg_.layers; ++l) {
    const LayerParams<T>& w = params_.layers[l];
    auto& lc = cache.layers[l];
    lc.x_in = x;
    lc.ln1_out.resize(nd);
    lc.ln1_mean.resize(len);
    lc.ln1_rstd.resize(len);
    LayerNormForward(x.data(), w.ln1_gain.data.data(), w.ln1_bias.data.data(),
                     lc.ln1_out.data(), lc.ln1_mean.data(), lc.ln1_rstd.data(), len, d);

    lc.q.resize(nd);
    lc.k.resize(nd);
    lc.v.resize(nd);
    Linear<T>(lc.ln1_out, w.wq, lc.q, len);
    Linear<T>(lc.ln1_out, w.wk, lc.k, len);
    Linear<T>(lc.ln1_out, w.wv, lc.v, len);
    if (lora) {
      const auto& a = lora->layers[l];
      const T scale = T(lora->Scale());
      LoraForward<T>(lc.ln1_out, a.q_a, a.q_b, scale, lc.lora_q_mid, lc.q, len);
      LoraForward<T>(lc.ln1_out, a.v_a, a.v_b, scale, lc.lora_v_mid, lc.v, len);
    }
    lc.probs.resize(static_cast<std::size_t>(cfg_.heads) * len * len);
    lc.attn_out.resize(nd);
    kernels::CausalAttention<T>(lc.q, lc.k, lc.v, lc.probs, lc.attn_out, len,
                                cfg_.heads, cfg_.head_dim());
    std::vector<T> proj(nd);
    Linear<T>(lc.attn_out, w.wo, proj, len);
    for (std::size_t i = 0; i < nd; ++i) x[i] += proj[i];

    lc.x_mid = x;
    lc.ln2_out.resize(nd);
    lc.ln2_mean.resize(len);
    lc.ln2_rstd.resize(len);
    LayerNormForward(x.data(), w.ln2_gain.data.data(), w.ln2_bias.data.data(),
                     lc.ln2_out.data(), lc.ln2_mean.data(), lc.ln2_rstd.data(), len, d);
    lc.ffn_pre.resize(static_cast<std::size_t>(len) * ffn);
    Linear<T>(lc.ln2_out, w.w1, lc.ffn_pre, len);
    AddBiasRows(lc.ffn_pre.data(), w.b1.data.data(), len, ffn);
    lc.ffn_act.resize(lc.ffn_pre.size());
    for (std::size_t i = 0; i < lc.ffn_pre.size(); ++i) lc.ffn_act[i] = Gelu(lc.ffn_pre[i]);
    Linear<T>(lc.ffn_act, w.w2, proj, len);
    AddBiasRows(proj.data(), w.b2.data.data(), len, d);
    for (std::size_t i = 0; i < nd; ++i) x[i] += proj[i];
  }

  cache.x_final = x;
  cache.lnf_out.resize(nd);
  cache.lnf_mean.resize(len);
  cache.lnf_rstd.resize(len);
  LayerNormForward(x.data(), params_.lnf_gain.data.data(), params_.lnf_bias.data.data(),
                   cache.lnf_out.data(), cache.lnf_mean.data(), cache.lnf_rstd.data(),
                   len, d);
  std::vector<T> logits(static_cast<std::size_t>(len) * cfg_.vocab_size);
  Linear<T>(cache.lnf_out, params_.tok_emb, logits, len);
  return logits;
}

template <typename T>
void Transformer<T>::Backward(const ForwardCache<T>& cache,
                              std::span<const T> d_logits,
                              const LoraParams<T>* lora, ModelParams<T>* g,
                              LoraParams<T>* lg) const {
  const int len = int(cache.ids.size());
  const int d = cfg_.dim;
  const int ffn = cfg_.ffn_dim;
  const int vocab = cfg_.vocab_size;
  const std::size_t nd = std::size_t(len) * d;
  Require(d_logits.size() == std::size_t(len) * vocab, "d_logits size mismatch");
  Require(!lg || lora, "adapter gradients requested without adapters");

  // Tied head: logits = lnf_out * tok_emb^T.
  if (g) {
    kernels::MatMulTN<T>(d_logits, C(cache.lnf_out), g->tok_emb.span(), vocab, d,
                         len, true);
  }
  std::vector<T> d_lnf(nd);
  kernels::MatMulNN<T>(d_logits, params_.tok_emb.span(), d_lnf, len, d, vocab, false);
  std::vector<T> dx(nd, T(0));
  LayerNormBackward(cache.x_final.data(), cache.lnf_mean.data(), cache.lnf_rstd.data(),
                    params_.lnf_gain.data.data(), d_lnf.data(), dx.data(),
                    g ? g->lnf_gain.data.data() : nullptr,
                    g ? g->lnf_bias.data.data() : nullptr, len, d);

  std::vector<T> d_act(static_cast<std::size_t>(len) * ffn);
  std::vector<T> d_ln(nd);
  std::vector<T> d_attn(nd), d_q(nd), d_k(nd), d_v(nd);
  std::vector<T> scratch(static_cast<std::size_t>(cfg_.heads) * len * len);

  for (int l = cfg_.layers - 1; l >= 0; --l) {
    const LayerParams<T>& w = params_.layers[l];
    const auto& lc = cache.layers[l];
    LayerParams<T>* gl = g ? &g->layers[l] : nullptr;

    // Feed-forward block; dx is the gradient of the block output.
    if (gl) {
      kernels::MatMulTN<T>(C(dx), C(lc.ffn_act), gl->w2.span(), d, ffn, len, true);
      ColumnSums(dx.data(), gl->b2.data.data(), len, d);
    }
    kernels::MatMulNN<T>(C(dx), w.w2.span(), d_act, len, ffn, d, false);
    for (std::size_t i = 0; i < d_act.size(); ++i) d_act[i] *= GeluGrad(lc.ffn_pre[i]);
    if (gl) {
      kernels::MatMulTN<T>(C(d_act), C(lc.ln2_out), gl->w1.span(), ffn, d, len, true);
      ColumnSums(d_act.data(), gl->b1.data.data(), len, ffn);
    }
    kernels::MatMulNN<T>(C(d_act), w.w1.span(), d_ln, len, d, ffn, false);
    LayerNormBackward(lc.x_mid.data(), lc.ln2_mean.data(), lc.ln2_rstd.data(),
                      w.ln2_gain.data.data(), d_ln.data(), dx.data(),
                      gl ? gl->ln2_gain.data.data() : nullptr,
                      gl ? gl->ln2_bias.data.data() : nullptr, len, d);

    // Attention block.
    if (gl) {
      kernels::MatMulTN<T>(C(dx), C(lc.attn_out), gl->wo.span(), d, d, len, true);
    }
    kernels::MatMulNN<T>(C(dx), w.wo.span(), d_attn, len, d, d, false);
    kernels::CausalAttentionBackward<T>(lc.q, lc.k, lc.v, lc.probs, d_attn, d_q, d_k,
                                        d_v, scratch, len, cfg_.heads,
                                        cfg_.head_dim());
    if (gl) {
      kernels::MatMulTN<T>(C(d_q), C(lc.ln1_out), gl->wq.span(), d, d, len, true);
      kernels::MatMulTN<T>(C(d_k), C(lc.ln1_out), gl->wk.span(), d, d, len, true);
      kernels::MatMulTN<T>(C(d_v), C(lc.ln1_out), gl->wv.span(), d, d, len, true);
    }
    kernels::MatMulNN<T>(C(d_q), w.wq.span(), d_ln, len, d, d, false);
    kernels::MatMulNN<T>(C(d_k), w.wk.span(), d_ln, len, d, d, true);
    kernels::MatMulNN<T>(C(d_v), w.wv.span(), d_ln, len, d, d, true);
    if (lora) {
      const auto& a = lora->layers[l];
      const T scale = T(lora->Scale());
      LoraLayer<T>* ga = lg ? &lg->layers[l] : nullptr;
      LoraBackward<T>(lc.ln1_out, a.q_a, a.q_b, scale, lc.lora_q_mid, d_q, d_ln,
                      ga ? &ga->q_a : nullptr, ga ? &ga->q_b : nullptr, len);
      LoraBackward<T>(lc.ln1_out, a.v_a, a.v_b, scale, lc.lora_v_mid, d_v, d_ln,
                      ga ? &ga->v_a : nullptr, ga ? &ga->v_b : nullptr, len);
    }
    LayerNormBackward(lc.x_in.data(), lc.ln1_mean.data(), lc.ln1_rstd.data(),
                      w.ln1_gain.data.data(), d_ln.data(), dx.data(),
                      gl ? gl->ln1_gain.data.data() : nullptr,
                      gl ? gl->ln1_bias.data.data() : nullptr, len, d);
  }

  if (g) {
    for (int i = 0; i < len; ++i) {
      T* te = g->tok_emb.row(cache.ids[i]);
      T* pe = g->pos_emb.row(i);
      const T* dxi = dx.data() + std::size_t(i) * d;
      for (int c = 0; c < d; ++c) {
        te[c] += dxi[c];
        pe[c] += dxi[c];
      }
    }
  }
}

template <typename T>
DecodeState<T>::DecodeState(const Transformer<T>& model, const LoraParams<T>* lora)
    : model_(model), lora_(lora) {
  const auto& cfg = model.config();
  keys_.assign(static_cast<std::size_t>(cfg.layers),
               std::vector<T>(static_cast<std::size_t>(cfg.max_len) * cfg.dim));
  values_ = keys_;
}

template <typename T>
std::vector<T> DecodeState<T>::Step(TokenId id) {
  const ModelConfig& cfg = model_.config();
  const ModelParams<T>& p = model_.params();
  if (length_ >= cfg.max_len) Fail(ErrorKind::kInvalidArgument, "decode exceeds max_len");
  if (id < 0 || id >= cfg.vocab_size) {
    Fail(ErrorKind::kInvalidArgument, "token id out of range: " + std::to_string(id));
  }
  const int d = cfg.dim;
  const int pos = length_;
  const int hd = cfg.head_dim();
  std::vector<T> x(d);
  for (int c = 0; c < d; ++c) x[c] = p.tok_emb.row(id)[c] + p.pos_emb.row(pos)[c];

  std::vector<T> a(d), q(d), o(d), proj(d), h(static_cast<std::size_t>(cfg.ffn_dim));
  std::vector<T> scores(static_cast<std::size_t>(pos) + 1);
  T mean, rstd;
  for (int l = 0; l < cfg.layers; ++l) {
    const LayerParams<T>& w = p.layers[l];
    LayerNormForward(x.data(), w.ln1_gain.data.data(), w.ln1_bias.data.data(), a.data(),
                     &mean, &rstd, 1, d);
    std::span<T> k_row(keys_[l].data() + std::size_t(pos) * d, std::size_t(d));
    std::span<T> v_row(values_[l].data() + std::size_t(pos) * d, std::size_t(d));
    Linear<T>(a, w.wq, q, 1);
    Linear<T>(a, w.wk, k_row, 1);
    Linear<T>(a, w.wv, v_row, 1);
    if (lora_) {
      const auto& la = lora_->layers[l];
      const T scale = T(lora_->Scale());
      std::vector<T> mid;
      LoraForward<T>(a, la.q_a, la.q_b, scale, mid, q, 1);
      LoraForward<T>(a, la.v_a, la.v_b, scale, mid, v_row, 1);
    }
    // Same arithmetic as one query row of kernels::CausalAttention.
    const T scale = T(1) / std::sqrt(T(hd));
    for (int hh = 0; hh < cfg.heads; ++hh) {
      const T* qh = q.data() + hh * hd;
      T max_score = -std::numeric_limits<T>::infinity();
      for (int j = 0; j <= pos; ++j) {
        const T* kj = keys_[l].data() + std::size_t(j) * d + hh * hd;
        T s = 0;
        for (int c = 0; c < hd; ++c) s += qh[c] * kj[c];
        scores[j] = s * scale;
        max_score = std::max(max_score, scores[j]);
      }
      T total = 0;
      for (int j = 0; j <= pos; ++j) {
        scores[j] = std::exp(scores[j] - max_score);
        total += scores[j];
      }
      for (int j = 0; j <= pos; ++j) scores[j] /= total;
      T* oh = o.data() + hh * hd;
      std::fill(oh, oh + hd, T(0));
      for (int j = 0; j <= pos; ++j) {
        const T* vj = values_[l].data() + std::size_t(j) * d + hh * hd;
        for (int c = 0; c < hd; ++c) oh[c] += scores[j] * vj[c];
      }
    }
    Linear<T>(o, w.wo, proj, 1);
    for (int c = 0; c < d; ++c) x[c] += proj[c];
    LayerNormForward(x.data(), w.ln2_gain.data.data(), w.ln2_bias.data.data(), a.data(),
                     &mean, &rstd, 1, d);
    Linear<T>(a, w.w1, h, 1);
    AddBiasRows(h.data(), w.b1.data.data(), 1, cfg.ffn_dim);
    for (T& v : h) v = Gelu(v);
    Linear<T>(h, w.w2, proj, 1);
    AddBiasRows(proj.data(), w.b2.data.data(), 1, d);
    for (int c = 0; c < d; ++c) x[c] += proj[c];
  }
  LayerNormForward(x.data(), p.lnf_gain.data.data(), p.lnf_bias.data.data(), a.data(),
                   &mean, &rstd, 1, d);
  std::vector<T> logits(static_cast<std::size_t>(cfg.vocab_size));
  Linear<T>(a, p.tok_emb, logits, 1);
  ++length_;
  return logits;
}

template <typename To, typename From>
ModelParams<To> CastParams(const ModelParams<From>& in) {
  ModelParams<To> out;
  auto cast = [](const Tensor<From>& t) {
    Tensor<To> r(t.name, t.rows, t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) r.data[i] = To(t.data[i]);
    return r;
  };
  out.tok_emb = cast(in.tok_emb);
  out.pos_emb = cast(in.pos_emb);
  for (const auto& l : in.layers) {
    out.layers.push_back({cast(l.ln1_gain), cast(l.ln1_bias), cast(l.wq), cast(l.wk),
                          cast(l.wv), cast(l.wo), cast(l.ln2_gain), cast(l.ln2_bias),
                          cast(l.w1), cast(l.b1), cast(l.w2), cast(l.b2)});
  }
  out.lnf_gain = cast(in.lnf_gain);
  out.lnf_bias = cast(in.lnf_bias);
  return out;
}

template <typename To, typename From>
LoraParams<To> CastLora(const LoraParams<From>& in) {
  LoraParams<To> out;
  out.rank = in.rank;
  out.alpha = in.alpha;
  auto cast = [](const Tensor<From>& t) {
    Tensor<To> r(t.name, t.rows, t.cols);
    for (std::size_t i = 0; i < t.size(); ++i) r.data[i] = To(t.data[i]);
    return r;
  };
  for (const auto& l : in.layers) {
    out.layers.push_back({cast(l.q_a), cast(l.q_b), cast(l.v_a), cast(l.v_b)});
  }
  return out;
}

std::size_t ParameterSelection::Count() const {
  std::size_t n = 0;
  for (const auto* t : tensors) n += t->size();
  return n;
}

ParameterSelection TrainableParameters(Model& model, Lora* lora, int stage) {
  ParameterSelection sel;
  switch (stage) {
    case 1:
    case 2:
      model.params().ForEach([&](Tensor<float>& t) { sel.tensors.push_back(&t); });
      break;
    case 3:
      if (!lora) Fail(ErrorKind::kInvalidArgument, "stage 3 requires adapters");
      lora->ForEach([&](Tensor<float>& t) { sel.tensors.push_back(&t); });
      break;
    default:
      Fail(ErrorKind::kInvalidArgument, "invalid stage " + std::to_string(stage));
  }
  return sel;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template struct LoraParams<float>;
template struct LoraParams<double>;
template class Transformer<float>;
template class Transformer<double>;
template class DecodeState<float>;
template class DecodeState<double>;
template ModelParams<double> CastParams<double, float>(const ModelParams<float>&);
template ModelParams<float> CastParams<float, double>(const ModelParams<double>&);
template LoraParams<double> CastLora<double, float>(const LoraParams<float>&);
template LoraParams<float> CastLora<float, double>(const LoraParams<double>&);

}  // namespace unitlm
