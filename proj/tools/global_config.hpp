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

// Settings shared by every subcommand. A JSON file fills the struct first;
// command-line flags are bound to the same fields and override it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "unitlm/audio.hpp"
#include "unitlm/sampling.hpp"
#include "unitlm/t2u.hpp"
#include "unitlm/trainer.hpp"
#include "unitlm/units.hpp"

namespace unitlm::cli {

struct StageSection {
  StageConfig train;
  bool seed_set = false;  // otherwise the global seed is used
  int cross_weight = 1;   // stage 2 only
  int text_weight = 1;    // stage 2 only
};

struct Paths {
  std::string manifest, codebook, units, t2u, dataset, init, adapters, model;
  std::string cross, text, chain, prompts, report, out, audio_out, text_instructions;
  std::string asr_pool, tts_pool, response;
};

struct GlobalConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  FeatureConfig features;
  int k = 100;
  int kmeans_iters = 50;
  double p = 0.5;
  int pack_max_len = 512;
  int max_response_words = 35;
  ModelConfig model;  // vocab_size is derived from K
  StageSection stages[3];
  TextToUnitConfig t2u;
  int t2u_max_units = 512;
  SamplingConfig sampling;
  SynthConfig synth;
  Paths paths;

  GlobalConfig();
  StageSection& stage(int s) { return stages[s - 1]; }

  // Throws kInvalidArgument on unknown keys, wrong types or invalid values.
  static GlobalConfig Load(const std::filesystem::path& path);
  void Validate() const;
};

}  // namespace unitlm::cli
