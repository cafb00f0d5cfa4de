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

// Small pre-LayerNorm decoder-only transformer with hand-written backward
// pass, tied input/output embeddings, learned absolute positions and optional
// low-rank adapters on the query and value projections.
//
// The scalar type is a template parameter. Training and inference run in
// float; double exists so gradients can be checked against finite
// differences.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "unitlm/vocab.hpp"

namespace unitlm {

struct ModelConfig {
  int layers = 4;
  int dim = 128;
  int heads = 4;
  int ffn_dim = 512;
  int max_len = 1024;
  int vocab_size = 0;

  void Validate() const;
  int head_dim() const { return dim / heads; }
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::string n, int r, int c)
      : name(std::move(n)), rows(r), cols(c), data(std::size_t(r) * c, T(0)) {}

  std::size_t size() const { return data.size(); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
  T* row(int i) { return data.data() + std::size_t(i) * cols; }
  const T* row(int i) const { return data.data() + std::size_t(i) * cols; }
};

template <typename T>
struct LayerParams {
  Tensor<T> ln1_gain, ln1_bias;
  Tensor<T> wq, wk, wv, wo;  // [dim x dim], stored out x in
  Tensor<T> ln2_gain, ln2_bias;
  Tensor<T> w1, b1;  // [ffn x dim], [1 x ffn]
  Tensor<T> w2, b2;  // [dim x ffn], [1 x dim]
};

template <typename T>
struct ModelParams {
  Tensor<T> tok_emb;  // [vocab x dim], also the output head
  Tensor<T> pos_emb;  // [max_len x dim]
  std::vector<LayerParams<T>> layers;
  Tensor<T> lnf_gain, lnf_bias;

  // Zero-filled parameters with canonical names and shapes.
  static ModelParams Zeros(const ModelConfig& cfg);

  // Visits every tensor in canonical (checkpoint) order.
  template <typename F>
  void ForEach(F&& f) {
    f(tok_emb);
    f(pos_emb);
    for (auto& l : layers) {
      for (Tensor<T>* t : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.wk, &l.wv, &l.wo,
                           &l.ln2_gain, &l.ln2_bias, &l.w1, &l.b1, &l.w2, &l.b2}) {
        f(*t);
      }
    }
    f(lnf_gain);
    f(lnf_bias);
  }
  template <typename F>
  void ForEach(F&& f) const {
    const_cast<ModelParams*>(this)->ForEach(
        [&](const Tensor<T>& t) { f(t); });
  }

  std::size_t Count() const;
};

template <typename T>
struct LoraLayer {
  Tensor<T> q_a, q_b;  // A: [rank x dim], B: [dim x rank]
  Tensor<T> v_a, v_b;
};

template <typename T>
struct LoraParams {
  int rank = 8;
  double alpha = 16.0;
  std::vector<LoraLayer<T>> layers;

  double Scale() const { return alpha / rank; }

  // A ~ N(0, 1/dim), B = 0, so a fresh adapter leaves the model unchanged.
  static LoraParams Init(const ModelConfig& cfg, int rank, double alpha,
                         std::uint64_t seed);
  static LoraParams Zeros(const ModelConfig& cfg, int rank, double alpha);

  template <typename F>
  void ForEach(F&& f) {
    for (auto& l : layers) {
      f(l.q_a);
      f(l.q_b);
      f(l.v_a);
      f(l.v_b);
    }
  }
  template <typename F>
  void ForEach(F&& f) const {
    const_cast<LoraParams*>(this)->ForEach([&](const Tensor<T>& t) { f(t); });
  }

  std::size_t Count() const;
};

// Everything the backward pass needs from one forward pass.
template <typename T>
struct ForwardCache;

template <typename T>
class Transformer {
 public:
  Transformer(const ModelConfig& cfg, ModelParams<T> params);

  // Fresh model whose token embedding is a random base-vocabulary matrix
  // expanded to `cfg.vocab_size` rows with ExpandEmbeddings.
  static Transformer Init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  // Logits [len x vocab]. Throws on empty or overlong input and on ids
  // outside the vocabulary.
  std::vector<T> Forward(std::span<const TokenId> ids,
                         const LoraParams<T>* lora = nullptr) const;

  // Forward pass that keeps activations for Backward.
  std::vector<T> Forward(std::span<const TokenId> ids, const LoraParams<T>* lora,
                         ForwardCache<T>& cache) const;

  // Accumulates parameter gradients for the loss whose gradient with respect
  // to the logits is `d_logits`. Either gradient sink may be null; with a
  // null `model_grad` the base weights only propagate signal.
  void Backward(const ForwardCache<T>& cache, std::span<const T> d_logits,
                const LoraParams<T>* lora, ModelParams<T>* model_grad,
                LoraParams<T>* lora_grad) const;

 private:
  void CheckInput(std::span<const TokenId> ids) const;

  ModelConfig cfg_;
  ModelParams<T> params_;
};

template <typename T>
struct ForwardCache {
  struct Layer {
    std::vector<T> x_in, ln1_out, ln1_mean, ln1_rstd;
    std::vector<T> q, k, v, probs, attn_out;
    std::vector<T> lora_q_mid, lora_v_mid;  // [len x rank]
    std::vector<T> x_mid, ln2_out, ln2_mean, ln2_rstd;
    std::vector<T> ffn_pre, ffn_act;
  };
  std::vector<TokenId> ids;
  std::vector<Layer> layers;
  std::vector<T> x_final, lnf_out, lnf_mean, lnf_rstd;
};

// Incremental decoding with cached keys and values. Produces logits equal to
// the corresponding rows of a full Forward over the same prefix.
template <typename T>
class DecodeState {
 public:
  DecodeState(const Transformer<T>& model, const LoraParams<T>* lora);

  // Appends one token and returns the next-token logits [vocab].
  std::vector<T> Step(TokenId id);
  int length() const { return length_; }

 private:
  const Transformer<T>& model_;
  const LoraParams<T>* lora_;
  int length_ = 0;
  std::vector<std::vector<T>> keys_, values_;  // per layer [max_len x dim]
};

template <typename To, typename From>
ModelParams<To> CastParams(const ModelParams<From>& in);
template <typename To, typename From>
LoraParams<To> CastLora(const LoraParams<From>& in);

using Model = Transformer<float>;
using Lora = LoraParams<float>;

// The tensors an optimizer may update in a training stage: stages 1 and 2
// train every model parameter, stage 3 trains only the adapters.
struct ParameterSelection {
  std::vector<Tensor<float>*> tensors;
  std::size_t Count() const;
};

ParameterSelection TrainableParameters(Model& model, Lora* lora, int stage);

}  // namespace unitlm
