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

// Instruction-data construction: ASR/TTS cross-modal samples, text
// instructions, chain-of-modality quadruplets, and multi-turn packing of the
// tokenized results into training sequences.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unitlm/loss.hpp"
#include "unitlm/units.hpp"
#include "unitlm/vocab.hpp"

namespace unitlm {

struct ManifestRecord {
  std::string audio_path;
  std::string transcript;
};

// UTF-8 TSV, "audio_path<TAB>transcript" per line; blank lines skipped.
std::vector<ManifestRecord> LoadManifest(const std::filesystem::path& path);

enum class Task { kAsr, kTts };
std::string_view TaskName(Task task);
Task ParseTask(std::string_view name);

struct DescriptionPools {
  std::vector<std::string> asr;
  std::vector<std::string> tts;

  // Ten ASR and ten TTS task descriptions shipped with the library.
  static DescriptionPools Bundled();
  // One description per non-blank line.
  static std::vector<std::string> LoadPool(const std::filesystem::path& path);
};

struct CrossModalSample {
  Task task = Task::kAsr;
  std::string description;
  UnitSequence units;  // reduced
  std::string transcript;

  bool operator==(const CrossModalSample&) const = default;
};

// Prompt/response split of an instruction string. The prompt ends right
// after "[SpeechGPT]: ", so its token count is the loss prefix length.
struct InstructionText {
  std::string prompt;
  std::string response;
  std::string Full() const { return prompt + response; }
};

// "[Human]:{D}. This is input: {in}<eoh>.[SpeechGPT]: {out}<eos>." with
// (in, out) = (units, transcript) for ASR and (transcript, units) for TTS.
InstructionText FormatCrossModal(const CrossModalSample& sample);

// Per record: ASR with probability p else TTS, then a description drawn
// uniformly from that task's pool. Reproducible for a fixed seed.
std::vector<CrossModalSample> BuildCrossModal(std::span<const ManifestRecord> records,
                                              std::span<const UnitSequence> units,
                                              const DescriptionPools& pools, double p,
                                              std::uint64_t seed);

struct TextInstruction {
  std::string instruction;
  std::string response;
};

// Small built-in instruction/response set standing in for a text SFT corpus.
std::vector<TextInstruction> BundledTextInstructions();
// TSV "instruction<TAB>response".
std::vector<TextInstruction> LoadTextInstructions(const std::filesystem::path& path);

// "[Human]:{I}<eoh>.[SpeechGPT]: {R}<eos>."
InstructionText FormatTextInstruction(const TextInstruction& item);

enum class ChainFormat { kSiSr, kSiTr, kTiSr, kTiTr };
inline constexpr ChainFormat kAllChainFormats[] = {ChainFormat::kSiSr, ChainFormat::kSiTr,
                                                   ChainFormat::kTiSr, ChainFormat::kTiTr};
// "si-sr", "si-tr", "ti-sr", "ti-tr".
std::string_view ChainFormatName(ChainFormat format);
ChainFormat ParseChainFormat(std::string_view name);
bool SpeechInput(ChainFormat format);
bool SpeechOutput(ChainFormat format);

struct ChainQuadruplet {
  UnitSequence speech_instruction;
  std::string text_instruction;
  std::string text_response;
  UnitSequence speech_response;

  bool operator==(const ChainQuadruplet&) const = default;
};

// Instruction-side template text for a format; `instruction` is either the
// text instruction or the rendered unit string.
std::string ChainPromptText(ChainFormat format, std::string_view instruction);

// "[tq] {TextI}; [ta] {TextR}; [ua] {SpeechR}<eoa>" restricted to the
// segments the format uses.
std::string ChainResponseText(const ChainQuadruplet& q, ChainFormat format);

// Prompt + response + "." (the template's closing period).
InstructionText FormatChain(const ChainQuadruplet& q, ChainFormat format);

// Keeps quadruplets whose text response has at most `max_words` words.
std::vector<TextInstruction> FilterByResponseWords(std::span<const TextInstruction> items,
                                                   int max_words);

// Token ids of an instruction string plus its loss prefix length.
struct TokenizedSample {
  std::vector<TokenId> ids;
  int prefix_len = 0;
};

TokenizedSample Tokenize(const InstructionText& text, const Vocabulary& vocab);

struct PackedSequence {
  std::vector<TokenId> token_ids;
  std::vector<SegmentSpan> segments;

  bool operator==(const PackedSequence&) const = default;
};

struct PackResult {
  std::vector<PackedSequence> packs;
  std::size_t dropped = 0;  // samples longer than max_len
};

// Shuffles with `seed`, then fills packs greedily: a sample joins the open
// pack while the total stays <= max_len, otherwise it starts a new pack.
// Samples are never split.
PackResult PackMultiturn(std::span<const TokenizedSample> samples, int max_len,
                         std::uint64_t seed);

// JSON-lines I/O. Cross-modal: {"task","description","units","transcript"}.
// Chain: {"format","text_instruction","text_response","speech_instruction",
// "speech_response"}. Packed: {"token_ids","segments":[[start,prefix,end]]}.
void SaveCrossModal(const std::filesystem::path& path,
                    std::span<const CrossModalSample> samples);
std::vector<CrossModalSample> LoadCrossModal(const std::filesystem::path& path, int k);

struct ChainRecord {
  ChainFormat format = ChainFormat::kTiTr;
  ChainQuadruplet quad;
};
void SaveChain(const std::filesystem::path& path, std::span<const ChainRecord> records);
std::vector<ChainRecord> LoadChain(const std::filesystem::path& path, int k);

void SavePacked(const std::filesystem::path& path, std::span<const PackedSequence> packs);
// Validates segment structure; ids are checked against vocab_size.
std::vector<PackedSequence> LoadPacked(const std::filesystem::path& path, int vocab_size);

}  // namespace unitlm
