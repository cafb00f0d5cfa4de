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

#include <cstring>

#include "test_support.hpp"
#include "unitlm/error.hpp"
#include "unitlm/vocab.hpp"

namespace unitlm {
namespace {

TEST(Vocab, BaseLayout) {
  EXPECT_EQ(BuildBaseVocab().size, 264);
  const Vocabulary v(100);
  EXPECT_EQ(v.DecodeToString(std::vector<TokenId>{65}), "A");
  for (std::size_t s = 0; s < kSpecialTokens.size(); ++s) {
    const auto ids = v.Encode(kSpecialTokens[s]);
    ASSERT_EQ(ids.size(), 1u) << kSpecialTokens[s];
    EXPECT_EQ(ids[0], TokenId(256 + s));
    EXPECT_LT(ids[0], v.base_size());
  }
  EXPECT_EQ(v.Encode("[tq]"), std::vector<TokenId>{tok::kTq});
}

TEST(Vocab, ExpansionArithmetic) {
  const Vocabulary v(100);
  EXPECT_EQ(v.total_size(), 364);
  EXPECT_EQ(v.UnitId(0), 264);
  EXPECT_EQ(v.UnitId(99), 363);
  EXPECT_THROW(Vocabulary(0), Error);
}

TEST(Vocab, EncodeExamples) {
  const Vocabulary v(100);
  EXPECT_EQ(v.Encode("hi"), (std::vector<TokenId>{104, 105}));
  EXPECT_EQ(v.Encode("<u_{3}><u_{3}>"), (std::vector<TokenId>{267, 267}));
  try {
    v.Encode("<u_{100}>");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unit out of range"), std::string::npos);
  }
  EXPECT_THROW(v.Encode("<u_{x}>"), Error);
  EXPECT_THROW(v.Encode("<u_{12"), Error);
}

TEST(Vocab, DecodeSegments) {
  const Vocabulary v(10);
  const auto segs = v.Decode(v.Encode("ab<u_{1}><u_{2}>[ta] c<eoa>"));
  ASSERT_EQ(segs.size(), 5u);
  EXPECT_EQ(segs[0].text, "ab");
  EXPECT_EQ(segs[1].units, (std::vector<int>{1, 2}));
  EXPECT_EQ(segs[2].special, tok::kTa);
  EXPECT_EQ(segs[3].text, " c");
  EXPECT_EQ(segs[4].special, tok::kEoa);
}

TEST(Vocab, RoundTripRandomStrings) {
  Rng rng(21);
  const Vocabulary v(50);
  const std::string alphabet = "abc xyz.;:[]<>{}_u";
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const int parts = int(rng.Below(8));
    for (int p = 0; p < parts; ++p) {
      switch (rng.Below(3)) {
        case 0:
          for (int i = int(rng.Below(6)); i > 0; --i) {
            s.push_back(alphabet[rng.Below(alphabet.size())]);
          }
          break;
        case 1:
          s += Vocabulary::UnitText(int(rng.Below(50)));
          break;
        default:
          s += kSpecialTokens[rng.Below(kSpecialTokens.size())];
      }
    }
    // Stray "<u_{" fragments from the alphabet are rejected; skip those.
    std::vector<TokenId> ids;
    try {
      ids = v.Encode(s);
    } catch (const Error&) {
      continue;
    }
    EXPECT_EQ(v.DecodeToString(ids), s);
  }
}

TEST(Vocab, UnitBijectionExhaustive) {
  const Vocabulary v(100);
  std::vector<bool> seen(std::size_t(v.total_size()), false);
  for (int u = 0; u < 100; ++u) {
    const TokenId id = v.UnitId(u);
    ASSERT_TRUE(v.IsUnit(id));
    EXPECT_FALSE(seen[std::size_t(id)]);
    seen[std::size_t(id)] = true;
    EXPECT_EQ(v.UnitOf(id), u);
  }
  for (TokenId id = 0; id < v.total_size(); ++id) EXPECT_EQ(seen[std::size_t(id)], id >= 264);
}

TEST(Vocab, ManifestRoundTrip) {
  testing::TempDir dir("vocab");
  Vocabulary(42).SaveManifest(dir / "vocab.json");
  const Vocabulary r = Vocabulary::LoadManifest(dir / "vocab.json");
  EXPECT_EQ(r.unit_count(), 42);
  EXPECT_EQ(r.total_size(), 306);
}

TEST(Embeddings, PreservesBaseRowsBitForBit) {
  Rng rng(22);
  EmbeddingMatrix e{264, 64, {}};
  for (int i = 0; i < 264 * 64; ++i) e.values.push_back(float(rng.Normal(0.0, 1.0)));
  const EmbeddingMatrix x = ExpandEmbeddings(e, 100, 5);
  EXPECT_EQ(x.rows, 364);
  EXPECT_EQ(x.dim, 64);
  EXPECT_EQ(std::memcmp(x.values.data(), e.values.data(), e.values.size() * sizeof(float)), 0);
  const EmbeddingMatrix same = ExpandEmbeddings(e, 100, 5);
  const EmbeddingMatrix other = ExpandEmbeddings(e, 100, 6);
  EXPECT_EQ(same.values, x.values);
  EXPECT_NE(other.values, x.values);

  double sq = 0.0;
  for (std::size_t i = e.values.size(); i < x.values.size(); ++i) sq += x.values[i] * x.values[i];
  const double sd = std::sqrt(sq / double(100 * 64));
  EXPECT_NEAR(sd, 0.02, 0.002);

  e.values[3] = NAN;
  EXPECT_THROW(ExpandEmbeddings(e, 1, 0), Error);
}

}  // namespace
}  // namespace unitlm
