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

// Byte-level base vocabulary, the eight dialogue markers, and the unit-token
// extension appended after them.
//
//   ids [0, 256)               raw bytes
//   ids [256, 264)             special markers, in kSpecialTokens order
//   ids [264, 264 + K)         unit tokens, rendered "<u_{n}>"

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unitlm {

using TokenId = std::int32_t;

inline constexpr std::array<std::string_view, 8> kSpecialTokens = {
    "[Human]", "[SpeechGPT]", "<eoh>", "<eos>", "<eoa>", "[tq]", "[ta]", "[ua]"};

namespace tok {
inline constexpr TokenId kHuman = 256;
inline constexpr TokenId kSpeechGpt = 257;
inline constexpr TokenId kEoh = 258;
inline constexpr TokenId kEos = 259;
inline constexpr TokenId kEoa = 260;
inline constexpr TokenId kTq = 261;
inline constexpr TokenId kTa = 262;
inline constexpr TokenId kUa = 263;
}  // namespace tok

inline constexpr int kByteCount = 256;
inline constexpr int kBaseVocabSize = kByteCount + int(kSpecialTokens.size());

struct BaseVocabulary {
  int size = kBaseVocabSize;
};

BaseVocabulary BuildBaseVocab();

struct Segment {
  enum class Kind { kText, kSpecial, kUnits };
  Kind kind = Kind::kText;
  std::string text;        // kText: raw bytes; kSpecial: the marker literal
  TokenId special = -1;    // kSpecial only
  std::vector<int> units;  // kUnits only

  bool operator==(const Segment&) const = default;
};

class Vocabulary {
 public:
  // Appends `unit_count` unit tokens to the base vocabulary. unit_count >= 1.
  Vocabulary(const BaseVocabulary& base, int unit_count);
  explicit Vocabulary(int unit_count) : Vocabulary(BuildBaseVocab(), unit_count) {}

  int base_size() const { return base_size_; }
  int unit_count() const { return unit_count_; }
  int total_size() const { return base_size_ + unit_count_; }

  TokenId UnitId(int unit) const;
  bool IsUnit(TokenId id) const { return id >= base_size_ && id < total_size(); }
  static bool IsSpecial(TokenId id) { return id >= kByteCount && id < kBaseVocabSize; }
  static bool IsByte(TokenId id) { return id >= 0 && id < kByteCount; }
  int UnitOf(TokenId id) const { return id - base_size_; }

  static std::string UnitText(int unit);
  std::string UnitsText(std::span<const int> units) const;

  // Markers are matched before bytes, so "[tq]" is always the single special
  // id. Throws on "<u_{" not followed by digits and "}>", and on units >= K.
  std::vector<TokenId> Encode(std::string_view text) const;

  // Splits ids into maximal text runs, single specials and maximal unit runs.
  std::vector<Segment> Decode(std::span<const TokenId> ids) const;
  std::string DecodeToString(std::span<const TokenId> ids) const;
  static std::string Render(std::span<const Segment> segments);

  void SaveManifest(const std::filesystem::path& path) const;
  static Vocabulary LoadManifest(const std::filesystem::path& path);

 private:
  int base_size_;
  int unit_count_;
};

struct EmbeddingMatrix {
  int rows = 0;
  int dim = 0;
  std::vector<float> values;  // row-major [rows x dim]
};

// Rows [0, base.rows) are copied bit-for-bit; `unit_count` new rows follow,
// drawn from N(0, init_scale^2) with a generator seeded by `seed`.
EmbeddingMatrix ExpandEmbeddings(const EmbeddingMatrix& base, int unit_count,
                                 std::uint64_t seed, double init_scale = 0.02);

}  // namespace unitlm
