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

#include "unitlm/t2u.hpp"

#include "unitlm/error.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {

TokenizedSample TextToUnitSample(std::string_view transcript, const UnitSequence& units,
                                 const Vocabulary& vocab) {
  if (transcript.empty()) Fail(ErrorKind::kData, "empty transcript");
  if (units.units.empty()) Fail(ErrorKind::kData, "empty unit sequence");
  TokenizedSample s;
  s.ids = vocab.Encode(transcript);
  s.ids.push_back(tok::kEoh);
  s.prefix_len = int(s.ids.size());
  for (int u : units.units) s.ids.push_back(vocab.UnitId(u));
  s.ids.push_back(tok::kEos);
  return s;
}

StageResult TrainTextToUnit(std::span<const TextToUnitPair> pairs, int k,
                            const TextToUnitConfig& cfg) {
  if (pairs.empty()) Fail(ErrorKind::kData, "empty data: no text-unit pairs");
  const Vocabulary vocab(k);
  ModelConfig mc = cfg.model;
  mc.vocab_size = vocab.total_size();
  mc.Validate();
  const int max_len = std::min(mc.max_len, cfg.train.max_len);

  std::vector<PackedSequence> data;
  std::size_t dropped = 0;
  for (const auto& p : pairs) {
    const UnitSequence reduced = p.units.reduced ? p.units : Deduplicate(p.units);
    ValidateUnits(reduced, k);
    TokenizedSample s = TextToUnitSample(p.transcript, reduced, vocab);
    if (int(s.ids.size()) > max_len) {
      ++dropped;
      continue;
    }
    const int len = int(s.ids.size());
    data.push_back({std::move(s.ids), {{0, s.prefix_len, len}}});
  }
  if (data.empty()) Fail(ErrorKind::kData, "empty data: every pair exceeds max_len");

  Model model = Model::Init(mc, Rng::Derive(cfg.train.seed, 11));
  BatchSampler sampler({DataStream{std::move(data), 1}}, Rng::Derive(cfg.train.seed, 12));
  auto report = TrainLoop(model, nullptr, cfg.train, sampler);
  report.dropped = dropped;
  return {std::move(model), std::move(report)};
}

UnitSequence TextToUnits(std::string_view text, const Model& generator,
                         const SamplingConfig& sampling, int max_units) {
  if (text.empty()) Fail(ErrorKind::kInvalidArgument, "empty text");
  if (max_units < 1) Fail(ErrorKind::kInvalidArgument, "max_units must be positive");
  const int k = generator.config().vocab_size - kBaseVocabSize;
  if (k < 1) Fail(ErrorKind::kData, "generator vocabulary has no unit tokens");
  const Vocabulary vocab(k);
  std::vector<TokenId> prompt = vocab.Encode(text);
  prompt.push_back(tok::kEoh);
  if (int(prompt.size()) >= generator.config().max_len) {
    Fail(ErrorKind::kInvalidArgument, "text too long for the generator context");
  }

  SamplingConfig cfg = sampling;
  cfg.max_new_tokens = max_units;
  const TokenId stops[] = {tok::kEos};
  const Generation gen = Sample(generator, prompt, cfg, nullptr, stops);
  UnitSequence seq;
  for (TokenId id : gen.ids) {
    if (vocab.IsUnit(id)) seq.units.push_back(vocab.UnitOf(id));
  }
  if (seq.units.empty()) Fail(ErrorKind::kData, "generation failed: no units emitted");
  return Deduplicate(seq);
}

}  // namespace unitlm
