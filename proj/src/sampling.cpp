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

#include "unitlm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "unitlm/error.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {

void SamplingConfig::Validate(int vocab_size) const {
  Require(temperature > 0.0, "temperature must be positive");
  Require(top_k >= 1 && top_k <= vocab_size, "top_k must be in [1, vocab]");
  Require(top_p > 0.0 && top_p <= 1.0, "top_p must be in (0, 1]");
  Require(max_new_tokens >= 0, "max_new_tokens must be non-negative");
}

SamplingConfig SamplingConfig::Greedy(int max_new_tokens) {
  SamplingConfig cfg;
  cfg.temperature = 1.0;
  cfg.top_k = 1;
  cfg.top_p = 1.0;
  cfg.max_new_tokens = max_new_tokens;
  return cfg;
}

std::vector<Candidate> FilterDistribution(std::span<const float> logits,
                                          const SamplingConfig& cfg) {
  cfg.Validate(int(logits.size()));
  const int vocab = int(logits.size());
  std::vector<double> scaled(logits.size());
  double mx = -INFINITY;
  for (int v = 0; v < vocab; ++v) {
    scaled[v] = double(logits[v]) / cfg.temperature;
    mx = std::max(mx, scaled[v]);
  }
  std::vector<TokenId> order(logits.size());
  std::iota(order.begin(), order.end(), 0);
  const int k = std::min(cfg.top_k, vocab);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](TokenId a, TokenId b) {
                      return scaled[a] != scaled[b] ? scaled[a] > scaled[b] : a < b;
                    });
  std::vector<Candidate> kept;
  kept.reserve(static_cast<std::size_t>(k));
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    const double w = std::exp(scaled[order[i]] - mx);
    kept.push_back({order[i], w});
    total += w;
  }
  for (auto& c : kept) c.prob /= total;

  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < kept.size()) {
    mass += kept[keep].prob;
    ++keep;
    if (mass >= cfg.top_p) break;
  }
  kept.resize(keep);
  double renorm = 0.0;
  for (const auto& c : kept) renorm += c.prob;
  for (auto& c : kept) c.prob /= renorm;
  return kept;
}

TokenId DrawFrom(std::span<const Candidate> candidates, double uniform) {
  Require(!candidates.empty(), "cannot draw from an empty distribution");
  double running = 0.0;
  for (const auto& c : candidates) {
    running += c.prob;
    if (uniform < running) return c.id;
  }
  return candidates.back().id;
}

Generation Sample(const Model& model, std::span<const TokenId> prompt,
                  const SamplingConfig& cfg, const Lora* lora,
                  std::span<const TokenId> stop_ids,
                  const std::function<void(const StepTrace&)>& observer) {
  const ModelConfig& mc = model.config();
  cfg.Validate(mc.vocab_size);
  if (prompt.empty()) Fail(ErrorKind::kInvalidArgument, "empty prompt");
  if (int(prompt.size()) > mc.max_len) {
    Fail(ErrorKind::kInvalidArgument, "prompt exceeds max_len");
  }
  Rng rng(cfg.seed);
  DecodeState<float> state(model, lora);
  std::vector<float> logits;
  for (TokenId id : prompt) logits = state.Step(id);

  Generation out;
  for (int step = 0; step < cfg.max_new_tokens; ++step) {
    const auto kept = FilterDistribution(logits, cfg);
    const TokenId next = DrawFrom(kept, rng.Uniform());
    if (observer) observer(StepTrace{step, kept, next});
    out.ids.push_back(next);
    if (std::find(stop_ids.begin(), stop_ids.end(), next) != stop_ids.end()) {
      out.stopped = true;
      return out;
    }
    if (state.length() >= mc.max_len) break;
    logits = state.Step(next);
  }
  out.truncated = true;
  return out;
}

}  // namespace unitlm
