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

#include "unitlm/vocab.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "unitlm/error.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {
namespace {

constexpr int kManifestVersion = 1;
constexpr std::string_view kUnitOpen = "<u_{";
constexpr std::string_view kUnitClose = "}>";

}  // namespace

BaseVocabulary BuildBaseVocab() { return BaseVocabulary{}; }

Vocabulary::Vocabulary(const BaseVocabulary& base, int unit_count)
    : base_size_(base.size), unit_count_(unit_count) {
  if (unit_count < 1) {
    Fail(ErrorKind::kInvalidArgument, "vocabulary expansion needs K >= 1");
  }
}

TokenId Vocabulary::UnitId(int unit) const {
  if (unit < 0 || unit >= unit_count_) {
    Fail(ErrorKind::kData, "unit out of range: " + std::to_string(unit));
  }
  return base_size_ + unit;
}

std::string Vocabulary::UnitText(int unit) {
  return "<u_{" + std::to_string(unit) + "}>";
}

std::string Vocabulary::UnitsText(std::span<const int> units) const {
  std::string out;
  for (int u : units) {
    UnitId(u);
    out += UnitText(u);
  }
  return out;
}

std::vector<TokenId> Vocabulary::Encode(std::string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::string_view rest = text.substr(pos);
    bool matched = false;
    for (std::size_t s = 0; s < kSpecialTokens.size(); ++s) {
      if (rest.starts_with(kSpecialTokens[s])) {
        ids.push_back(TokenId(kByteCount + s));
        pos += kSpecialTokens[s].size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (rest.starts_with(kUnitOpen)) {
      std::size_t end = kUnitOpen.size();
      while (end < rest.size() && end - kUnitOpen.size() < 9 &&
             rest[end] >= '0' && rest[end] <= '9') {
        ++end;
      }
      const std::size_t digits = end - kUnitOpen.size();
      if (digits == 0 || !rest.substr(end).starts_with(kUnitClose)) {
        Fail(ErrorKind::kData,
             "malformed unit marker at byte " + std::to_string(pos));
      }
      const int unit = std::stoi(std::string(rest.substr(kUnitOpen.size(), digits)));
      if (unit >= unit_count_) {
        Fail(ErrorKind::kData, "unit out of range: " + std::to_string(unit));
      }
      ids.push_back(base_size_ + unit);
      pos += end + kUnitClose.size();
      continue;
    }
    ids.push_back(TokenId(static_cast<unsigned char>(text[pos])));
    ++pos;
  }
  return ids;
}

std::vector<Segment> Vocabulary::Decode(std::span<const TokenId> ids) const {
  std::vector<Segment> out;
  for (TokenId id : ids) {
    if (IsByte(id)) {
      if (out.empty() || out.back().kind != Segment::Kind::kText) {
        out.push_back(Segment{Segment::Kind::kText, {}, -1, {}});
      }
      out.back().text.push_back(char(id));
    } else if (IsSpecial(id)) {
      out.push_back(Segment{Segment::Kind::kSpecial,
                            std::string(kSpecialTokens[id - kByteCount]), id, {}});
    } else if (IsUnit(id)) {
      if (out.empty() || out.back().kind != Segment::Kind::kUnits) {
        out.push_back(Segment{Segment::Kind::kUnits, {}, -1, {}});
      }
      out.back().units.push_back(UnitOf(id));
    } else {
      Fail(ErrorKind::kData, "token id out of range: " + std::to_string(id));
    }
  }
  return out;
}

std::string Vocabulary::Render(std::span<const Segment> segments) {
  std::string out;
  for (const auto& s : segments) {
    switch (s.kind) {
      case Segment::Kind::kText:
      case Segment::Kind::kSpecial:
        out += s.text;
        break;
      case Segment::Kind::kUnits:
        for (int u : s.units) out += UnitText(u);
        break;
    }
  }
  return out;
}

std::string Vocabulary::DecodeToString(std::span<const TokenId> ids) const {
  return Render(Decode(ids));
}

void Vocabulary::SaveManifest(const std::filesystem::path& path) const {
  nlohmann::ordered_json doc;
  doc["version"] = kManifestVersion;
  doc["base_size"] = base_size_;
  doc["K"] = unit_count_;
  doc["total_size"] = total_size();
  doc["byte_tokens"] = kByteCount;
  auto& specials = doc["special_tokens"] = nlohmann::ordered_json::array();
  for (auto s : kSpecialTokens) specials.push_back(std::string(s));
  doc["unit_format"] = "<u_{n}>";
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write vocabulary manifest: " + path.string());
  out << doc.dump(2) << "\n";
}

Vocabulary Vocabulary::LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open vocabulary manifest: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("bad vocabulary manifest: ") + e.what());
  }
  try {
    if (doc.at("version").get<int>() != kManifestVersion) {
      Fail(ErrorKind::kFormat, "unsupported vocabulary manifest version");
    }
    if (doc.at("base_size").get<int>() != kBaseVocabSize) {
      Fail(ErrorKind::kFormat, "vocabulary manifest base_size mismatch");
    }
    const auto specials = doc.at("special_tokens").get<std::vector<std::string>>();
    if (specials.size() != kSpecialTokens.size() ||
        !std::equal(specials.begin(), specials.end(), kSpecialTokens.begin())) {
      Fail(ErrorKind::kFormat, "vocabulary manifest special-token order mismatch");
    }
    return Vocabulary(doc.at("K").get<int>());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("bad vocabulary manifest: ") + e.what());
  }
}

EmbeddingMatrix ExpandEmbeddings(const EmbeddingMatrix& base, int unit_count,
                                 std::uint64_t seed, double init_scale) {
  if (unit_count < 1) Fail(ErrorKind::kInvalidArgument, "K must be at least 1");
  Require(base.values.size() == std::size_t(base.rows) * base.dim,
          "embedding matrix size mismatch");
  for (float v : base.values) {
    if (!std::isfinite(v)) Fail(ErrorKind::kData, "non-finite embedding value");
  }
  EmbeddingMatrix out;
  out.rows = base.rows + unit_count;
  out.dim = base.dim;
  out.values.reserve(static_cast<std::size_t>(out.rows) * out.dim);
  out.values = base.values;
  Rng rng(seed);
  for (std::size_t i = 0; i < std::size_t(unit_count) * base.dim; ++i) {
    out.values.push_back(float(rng.Normal(0.0, init_scale)));
  }
  return out;
}

}  // namespace unitlm
