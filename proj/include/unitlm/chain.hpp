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

// Chain-of-modality inference: prompt assembly, response parsing and
// routing of spoken answers to the vocoder.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "unitlm/audio.hpp"
#include "unitlm/sampling.hpp"
#include "unitlm/speechinstruct.hpp"
#include "unitlm/units.hpp"

namespace unitlm {

struct ChainResponse {
  std::optional<std::string> transcribed_instruction;  // [tq]
  std::optional<std::string> text_response;            // [ta]
  std::optional<UnitSequence> unit_response;           // [ua]
  std::vector<TokenId> raw_ids;
  bool well_formed = false;
  bool truncated = false;
};

using ChainInstruction = std::variant<std::string, UnitSequence>;

// Token ids of the format's prompt; speech formats need a non-empty unit
// sequence and text formats a non-empty string.
std::vector<TokenId> AssemblePrompt(const ChainInstruction& instruction, ChainFormat format,
                                    const Vocabulary& vocab);

// Total parser. well_formed holds iff the markers are exactly the format's
// set in template order, each followed by a space and a non-empty body,
// joined by "; " and closed by <eoa> (optionally followed by "."). Text
// bodies hold bytes only; the unit body holds reduced units only.
ChainResponse ParseChainOutput(std::span<const TokenId> ids, ChainFormat format,
                               const Vocabulary& vocab);

struct RespondResult {
  ChainResponse response;
  std::optional<Waveform> audio;  // set only for well-formed spoken answers
};

// Assemble, sample until <eoa> or <eos>, parse, and synthesize the [ua]
// segment when a codebook is given.
RespondResult Respond(const Model& model, const Lora* adapters,
                      const ChainInstruction& instruction, ChainFormat format,
                      const SamplingConfig& sampling, const Codebook* codebook,
                      const SynthConfig& synth = {});

// JSON document mirroring ChainResponse.
std::string ChainResponseJson(const ChainResponse& response, ChainFormat format);

}  // namespace unitlm
