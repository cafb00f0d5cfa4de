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

// Central finite-difference check of the analytic masked-NLL gradient.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "unitlm/loss.hpp"
#include "unitlm/rng.hpp"
#include "unitlm/transformer.hpp"

namespace unitlm::testing {

struct GradCheckResult {
  double worst_rel = 0.0;
  int coordinates = 0;
};

// Relative error |a - f| / max(|a|, |f|, floor).
inline double RelError(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

// 2-layer d=16 double model on an 8-token sequence with two segments, the
// second prefix-masked. Coordinates are drawn across all model tensors and
// the LoRA tensors, whose B matrices are randomized so every path is live.
inline GradCheckResult GradientCheck(std::uint64_t seed, int coordinates, double step = 1e-5) {
  const ModelConfig mc{.layers = 2, .dim = 16, .heads = 2, .ffn_dim = 32, .max_len = 8,
                       .vocab_size = 264 + 12};
  Rng rng(seed);
  Transformer<double> model(mc, CastParams<double>(Transformer<float>::Init(mc, seed).params()));
  // Larger weights than the init keep gradients away from round-off.
  model.params().ForEach([&](Tensor<double>& t) {
    for (auto& v : t.data) v += rng.Normal(0.0, 0.1);
  });
  auto lora = LoraParams<double>::Zeros(mc, 2, 4.0);
  lora.ForEach([&](Tensor<double>& t) {
    for (auto& v : t.data) v = rng.Normal(0.0, 0.2);
  });

  std::vector<TokenId> ids(8);
  for (auto& id : ids) id = TokenId(rng.Below(std::uint64_t(mc.vocab_size)));
  const std::vector<SegmentSpan> segs{{0, 0, 3}, {3, 2, 8}};

  auto loss = [&] {
    const auto logits = model.Forward(ids, &lora);
    return MaskedNll<double>(logits, mc.vocab_size, ids, segs);
  };

  ForwardCache<double> cache;
  const auto logits = model.Forward(ids, &lora, cache);
  std::vector<double> d_logits(logits.size(), 0.0);
  const std::size_t count = TargetPositions(segs).size();
  MaskedNllSum<double>(logits, mc.vocab_size, ids, segs, d_logits, 1.0 / double(count));
  auto model_grad = ModelParams<double>::Zeros(mc);
  auto lora_grad = LoraParams<double>::Zeros(mc, 2, 4.0);
  model.Backward(cache, d_logits, &lora, &model_grad, &lora_grad);

  std::vector<Tensor<double>*> params, grads;
  model.params().ForEach([&](Tensor<double>& t) { params.push_back(&t); });
  lora.ForEach([&](Tensor<double>& t) { params.push_back(&t); });
  model_grad.ForEach([&](Tensor<double>& t) { grads.push_back(&t); });
  lora_grad.ForEach([&](Tensor<double>& t) { grads.push_back(&t); });

  std::size_t total = 0;
  for (auto* p : params) total += p->size();
  GradCheckResult result;
  for (int c = 0; c < coordinates; ++c) {
    std::size_t flat = std::size_t(rng.Below(total));
    std::size_t t = 0;
    while (flat >= params[t]->size()) flat -= params[t++]->size();
    double& x = params[t]->data[flat];
    const double saved = x;
    x = saved + step;
    const double up = loss();
    x = saved - step;
    const double down = loss();
    x = saved;
    const double numeric = (up - down) / (2.0 * step);
    result.worst_rel = std::max(result.worst_rel, RelError(grads[t]->data[flat], numeric));
    ++result.coordinates;
  }
  return result;
}

}  // namespace unitlm::testing
