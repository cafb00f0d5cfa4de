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

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "unitlm/checkpoint.hpp"
#include "unitlm/error.hpp"
#include "unitlm/t2u.hpp"

namespace unitlm {
namespace {

using testing::RandomReduced;

constexpr int kUnits = 20;

std::vector<TextToUnitPair> Pairs() {
  static const char* kText[] = {"hello there", "good morning", "open the door", "thank you",
                                "see you soon", "how are you", "it is late",    "come here",
                                "not today",   "well done"};
  Rng rng(1);
  std::vector<TextToUnitPair> pairs;
  for (const char* t : kText) pairs.push_back({t, RandomReduced(rng, 8, kUnits)});
  return pairs;
}

TextToUnitConfig Config(int steps) {
  TextToUnitConfig c;
  c.model.max_len = 64;
  c.train.max_len = 64;
  c.train.steps = steps;
  c.train.warmup_steps = std::min(c.train.warmup_steps, steps / 10);
  c.train.seed = 3;
  return c;
}

TEST(TextToUnit, SampleLayout) {
  const Vocabulary vocab(kUnits);
  const auto s = TextToUnitSample("ab", {{3, 4}, true}, vocab);
  EXPECT_EQ(s.ids, (std::vector<TokenId>{'a', 'b', tok::kEoh, vocab.UnitId(3), vocab.UnitId(4),
                                         tok::kEos}));
  EXPECT_EQ(s.prefix_len, 3);
}

TEST(TextToUnit, MemorizesTrainingPairs) {
  const auto pairs = Pairs();
  const auto r = TrainTextToUnit(pairs, kUnits, Config(500));
  const Vocabulary vocab(kUnits);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : pairs) {
    const auto s = TextToUnitSample(p.transcript, p.units, vocab);
    const std::vector<SegmentSpan> seg{{0, s.prefix_len, int(s.ids.size())}};
    const NllSum n =
        MaskedNllSum<float>(r.model.Forward(s.ids), vocab.total_size(), s.ids, seg);
    sum += n.sum;
    count += n.count;
  }
  EXPECT_LT(sum / double(count), 0.5);
  for (const auto& p : pairs) {
    const UnitSequence u = TextToUnits(p.transcript, r.model);
    EXPECT_EQ(u.units, p.units.units) << p.transcript;
    EXPECT_NO_THROW(ValidateUnits(u, kUnits));
  }
}

TEST(TextToUnit, DeterministicTraining) {
  const auto pairs = Pairs();
  const auto a = TrainTextToUnit(pairs, kUnits, Config(20));
  const auto b = TrainTextToUnit(pairs, kUnits, Config(20));
  EXPECT_EQ(ParameterSha256(a.model), ParameterSha256(b.model));
}

TEST(TextToUnit, Errors) {
  EXPECT_NE(std::string([] {
              try {
                TrainTextToUnit({}, kUnits, Config(20));
              } catch (const Error& e) {
                return e.what();
              }
              return "";
            }())
                .find("empty data"),
            std::string::npos);
  const Model m = Model::Init(testing::TinyConfig(kUnits, 16, 1, 32), 1);
  EXPECT_THROW(TextToUnits("", m), Error);
  // Output, when produced, always satisfies the reduced-sequence invariants.
  try {
    const UnitSequence u = TextToUnits("x", m, SamplingConfig::Greedy(), 20);
    EXPECT_NO_THROW(ValidateUnits(u, kUnits));
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("generation failed"), std::string::npos);
  }
}

}  // namespace
}  // namespace unitlm
