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

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "unitlm/transformer.hpp"

namespace unitlm {

struct SamplingConfig {
  double temperature = 0.8;
  int top_k = 60;
  double top_p = 0.8;
  int max_new_tokens = 512;
  std::uint64_t seed = 0;

  void Validate(int vocab_size) const;
  static SamplingConfig Greedy(int max_new_tokens = 512);
};

struct Candidate {
  TokenId id;
  double prob;  // renormalized over the kept set
};

// Temperature, then the top_k most probable ids (ties to the lower id), then
// the shortest descending-probability prefix of those whose renormalized mass
// reaches top_p. Returned in descending probability order, renormalized.
std::vector<Candidate> FilterDistribution(std::span<const float> logits,
                                          const SamplingConfig& cfg);

// Draws from a filtered distribution using one uniform variate.
TokenId DrawFrom(std::span<const Candidate> candidates, double uniform);

struct StepTrace {
  int step;
  std::vector<Candidate> kept;
  TokenId chosen;
};

struct Generation {
  std::vector<TokenId> ids;  // new tokens only; includes the stop token if hit
  bool stopped = false;      // ended on a stop token
  bool truncated = false;    // hit max_new_tokens or the context limit
};

// Autoregressive sampling from `prompt`. Stops after emitting any id in
// `stop_ids`. The optional observer sees every step's kept set.
Generation Sample(const Model& model, std::span<const TokenId> prompt,
                  const SamplingConfig& cfg, const Lora* lora,
                  std::span<const TokenId> stop_ids,
                  const std::function<void(const StepTrace&)>& observer = {});

}  // namespace unitlm
