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

#include "unitlm/chain.hpp"

#include "json.hpp"
#include "unitlm/error.hpp"

namespace unitlm {
namespace {

std::vector<TokenId> ExpectedMarkers(ChainFormat format) {
  std::vector<TokenId> m;
  if (SpeechInput(format)) m.push_back(tok::kTq);
  m.push_back(tok::kTa);
  if (SpeechOutput(format)) m.push_back(tok::kUa);
  return m;
}

bool IsMarker(TokenId id) { return id == tok::kTq || id == tok::kTa || id == tok::kUa; }

struct Section {
  TokenId marker;
  std::vector<TokenId> body;
};

// Strips a leading " " and, when `separated`, a trailing "; ". Returns
// false when either is missing.
bool TrimBody(std::vector<TokenId>& body, bool separated) {
  bool ok = true;
  if (!body.empty() && body.front() == ' ') {
    body.erase(body.begin());
  } else {
    ok = false;
  }
  if (separated) {
    const std::size_t n = body.size();
    if (n >= 2 && body[n - 2] == ';' && body[n - 1] == ' ') {
      body.resize(n - 2);
    } else {
      ok = false;
    }
  }
  return ok;
}

}  // namespace

std::vector<TokenId> AssemblePrompt(const ChainInstruction& instruction, ChainFormat format,
                                    const Vocabulary& vocab) {
  std::string slot;
  if (SpeechInput(format)) {
    const auto* units = std::get_if<UnitSequence>(&instruction);
    if (!units) {
      Fail(ErrorKind::kInvalidArgument,
           "format " + std::string(ChainFormatName(format)) + " needs a unit instruction");
    }
    if (units->units.empty()) Fail(ErrorKind::kInvalidArgument, "empty speech instruction");
    ValidateUnits(*units, vocab.unit_count());
    slot = vocab.UnitsText(units->units);
  } else {
    const auto* text = std::get_if<std::string>(&instruction);
    if (!text) {
      Fail(ErrorKind::kInvalidArgument,
           "format " + std::string(ChainFormatName(format)) + " needs a text instruction");
    }
    if (text->empty()) Fail(ErrorKind::kInvalidArgument, "empty text instruction");
    slot = *text;
  }
  return vocab.Encode(ChainPromptText(format, slot));
}

ChainResponse ParseChainOutput(std::span<const TokenId> ids, ChainFormat format,
                               const Vocabulary& vocab) {
  ChainResponse r;
  r.raw_ids.assign(ids.begin(), ids.end());
  bool ok = true;

  // Locate <eoa>; only an optional "." may follow it.
  std::size_t end = ids.size();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == tok::kEoa) {
      end = i;
      break;
    }
  }
  if (end == ids.size()) {
    ok = false;
  } else {
    const std::size_t tail = ids.size() - end - 1;
    if (tail > 1 || (tail == 1 && ids[end + 1] != '.')) ok = false;
  }

  std::vector<Section> sections;
  for (std::size_t i = 0; i < end; ++i) {
    if (IsMarker(ids[i])) {
      sections.push_back({ids[i], {}});
    } else if (sections.empty()) {
      ok = false;  // content before the first marker
    } else {
      sections.back().body.push_back(ids[i]);
    }
  }

  std::vector<TokenId> markers;
  for (const auto& s : sections) markers.push_back(s.marker);
  if (markers != ExpectedMarkers(format)) ok = false;

  for (std::size_t s = 0; s < sections.size(); ++s) {
    auto body = sections[s].body;
    if (!TrimBody(body, s + 1 < sections.size())) ok = false;
    if (body.empty()) ok = false;
    if (sections[s].marker == tok::kUa) {
      UnitSequence seq;
      for (TokenId id : body) {
        if (vocab.IsUnit(id)) {
          seq.units.push_back(vocab.UnitOf(id));
        } else {
          ok = false;
        }
      }
      for (std::size_t i = 1; i < seq.units.size(); ++i) {
        if (seq.units[i] == seq.units[i - 1]) ok = false;
      }
      seq = Deduplicate(seq);
      if (!r.unit_response) r.unit_response = std::move(seq);
      else ok = false;
    } else {
      std::string text;
      for (TokenId id : body) {
        if (Vocabulary::IsByte(id)) {
          text.push_back(char(id));
        } else {
          ok = false;
        }
      }
      auto& slot = sections[s].marker == tok::kTq ? r.transcribed_instruction : r.text_response;
      if (!slot) slot = std::move(text);
      else ok = false;
    }
  }
  r.well_formed = ok;
  return r;
}

RespondResult Respond(const Model& model, const Lora* adapters,
                      const ChainInstruction& instruction, ChainFormat format,
                      const SamplingConfig& sampling, const Codebook* codebook,
                      const SynthConfig& synth) {
  const int k = model.config().vocab_size - kBaseVocabSize;
  if (k < 1) Fail(ErrorKind::kData, "model vocabulary has no unit tokens");
  const Vocabulary vocab(k);
  const auto prompt = AssemblePrompt(instruction, format, vocab);
  const TokenId stops[] = {tok::kEoa, tok::kEos};
  const Generation gen = Sample(model, prompt, sampling, adapters, stops);

  RespondResult result;
  result.response = ParseChainOutput(gen.ids, format, vocab);
  result.response.truncated = gen.truncated;
  if (gen.truncated) result.response.well_formed = false;
  if (codebook && result.response.well_formed && result.response.unit_response) {
    if (codebook->k() != k) Fail(ErrorKind::kData, "codebook K does not match the model");
    result.audio = Synthesize(*result.response.unit_response, *codebook, synth);
  }
  return result;
}

std::string ChainResponseJson(const ChainResponse& r, ChainFormat format) {
  nlohmann::ordered_json doc;
  doc["format"] = ChainFormatName(format);
  doc["well_formed"] = r.well_formed;
  doc["truncated"] = r.truncated;
  doc["transcribed_instruction"] =
      r.transcribed_instruction ? nlohmann::ordered_json(*r.transcribed_instruction) : nullptr;
  doc["text_response"] = r.text_response ? nlohmann::ordered_json(*r.text_response) : nullptr;
  doc["unit_response"] =
      r.unit_response ? nlohmann::ordered_json(r.unit_response->units) : nullptr;
  doc["raw_ids"] = r.raw_ids;
  return doc.dump(2, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace unitlm
