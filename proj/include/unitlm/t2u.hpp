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

// Text-to-unit generator: a decoder-only model over "transcript <eoh> units
// <eos>", trained with the transcript and <eoh> as a loss-free prefix.

#pragma once

#include <span>
#include <string>
#include <string_view>

#include "unitlm/sampling.hpp"
#include "unitlm/trainer.hpp"

namespace unitlm {

struct TextToUnitPair {
  std::string transcript;
  UnitSequence units;
};

struct TextToUnitConfig {
  ModelConfig model{.layers = 2, .dim = 64, .heads = 4, .ffn_dim = 256, .max_len = 1024};
  StageConfig train = [] {
    StageConfig c;
    c.stage = 2;
    c.batch_size = 8;
    c.peak_lr = 3e-3;
    c.steps = 500;
    c.warmup_steps = 20;
    return c;
  }();
};

TokenizedSample TextToUnitSample(std::string_view transcript, const UnitSequence& units,
                                 const Vocabulary& vocab);

// Trains a fresh generator on the pairs. K is taken from `k`.
StageResult TrainTextToUnit(std::span<const TextToUnitPair> pairs, int k,
                            const TextToUnitConfig& cfg);

// Generates a reduced unit sequence for `text`, stopping at <eos> or after
// `max_units` tokens. Non-unit tokens before <eos> are skipped.
UnitSequence TextToUnits(std::string_view text, const Model& generator,
                         const SamplingConfig& sampling = SamplingConfig::Greedy(),
                         int max_units = 512);

}  // namespace unitlm
