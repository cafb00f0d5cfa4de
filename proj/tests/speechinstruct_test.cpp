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

#include <fstream>
#include <numeric>
#include <set>

#include "test_support.hpp"
#include "unitlm/error.hpp"
#include "unitlm/speechinstruct.hpp"

namespace unitlm {
namespace {

using testing::RandomReduced;
using testing::TempDir;

std::string Message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(Manifest, Examples) {
  TempDir dir("manifest");
  std::ofstream(dir / "ok.tsv") << "a.wav\thello\n\nb.wav\tworld two\n";
  const auto recs = LoadManifest(dir / "ok.tsv");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].audio_path, "a.wav");
  EXPECT_EQ(recs[0].transcript, "hello");
  EXPECT_EQ(recs[1].transcript, "world two");

  std::ofstream(dir / "empty.tsv").close();
  EXPECT_TRUE(LoadManifest(dir / "empty.tsv").empty());

  std::ofstream(dir / "bad.tsv") << "a.wav\thi\nno-tab-here\n";
  const auto msg = Message([&] { LoadManifest(dir / "bad.tsv"); });
  EXPECT_NE(msg.find("missing column"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
  EXPECT_THROW(LoadManifest(dir / "absent.tsv"), Error);
}

TEST(CrossModal, AsrTemplateExact) {
  const CrossModalSample s{Task::kAsr, "Can you transcribe the speech into a written format?",
                           {{1, 2}, true}, "I'm afraid there are no signs here said he."};
  EXPECT_EQ(FormatCrossModal(s).Full(),
            "[Human]:Can you transcribe the speech into a written format?. This is input: "
            "<u_{1}><u_{2}><eoh>.[SpeechGPT]: I'm afraid there are no signs here said he.<eos>.");
}

TEST(CrossModal, TtsSingleUnitTarget) {
  const CrossModalSample s{Task::kTts, "Read this aloud", {{5}, true}, "go"};
  const auto t = FormatCrossModal(s);
  EXPECT_EQ(t.response, "<u_{5}><eos>.");
  EXPECT_NE(t.prompt.find("This is input: go<eoh>"), std::string::npos);
}

TEST(CrossModal, InjectiveOverFields) {
  Rng rng(1);
  std::set<std::tuple<std::string, std::vector<int>, std::string>> triples;
  std::set<std::string> formatted;
  for (int i = 0; i < 200; ++i) {
    const CrossModalSample s{Task::kAsr, "d" + std::to_string(rng.Below(5)),
                             RandomReduced(rng, 1 + int(rng.Below(3)), 4),
                             "t" + std::to_string(rng.Below(5))};
    triples.insert({s.description, s.units.units, s.transcript});
    formatted.insert(FormatCrossModal(s).Full());
  }
  EXPECT_EQ(triples.size(), formatted.size());
}

std::vector<ManifestRecord> Records(int n) {
  std::vector<ManifestRecord> r;
  for (int i = 0; i < n; ++i) r.push_back({"f" + std::to_string(i) + ".wav", "text " + std::to_string(i)});
  return r;
}

std::vector<UnitSequence> Units(int n) {
  Rng rng(2);
  std::vector<UnitSequence> u;
  for (int i = 0; i < n; ++i) u.push_back(RandomReduced(rng, 5, 10));
  return u;
}

TEST(CrossModal, TaskProbability) {
  const auto pools = DescriptionPools::Bundled();
  ASSERT_EQ(pools.asr.size(), 10u);
  ASSERT_EQ(pools.tts.size(), 10u);
  const auto recs = Records(10000);
  const auto units = Units(10000);
  for (const auto& s : BuildCrossModal(std::span(recs).first(200), std::span(units).first(200),
                                       pools, 1.0, 3)) {
    EXPECT_EQ(s.task, Task::kAsr);
    EXPECT_NE(std::find(pools.asr.begin(), pools.asr.end(), s.description), pools.asr.end());
  }
  for (const auto& s : BuildCrossModal(std::span(recs).first(200), std::span(units).first(200),
                                       pools, 0.0, 3)) {
    EXPECT_EQ(s.task, Task::kTts);
    EXPECT_NE(std::find(pools.tts.begin(), pools.tts.end(), s.description), pools.tts.end());
  }
  const auto half = BuildCrossModal(recs, units, pools, 0.5, 4);
  const auto asr = std::count_if(half.begin(), half.end(),
                                 [](const CrossModalSample& s) { return s.task == Task::kAsr; });
  EXPECT_GE(double(asr) / 10000.0, 0.47);
  EXPECT_LE(double(asr) / 10000.0, 0.53);
  EXPECT_EQ(BuildCrossModal(recs, units, pools, 0.5, 4), half);
}

TEST(CrossModal, Misaligned) {
  const auto recs = Records(3);
  const auto units = Units(2);
  EXPECT_NE(Message([&] { BuildCrossModal(recs, units, DescriptionPools::Bundled(), 0.5, 1); })
                .find("misaligned inputs"),
            std::string::npos);
}

TokenizedSample Synthetic(int len, int prefix) {
  TokenizedSample s;
  s.ids.assign(std::size_t(len), TokenId('a'));
  s.prefix_len = prefix;
  return s;
}

TEST(Packing, Examples) {
  const std::vector<TokenizedSample> two{Synthetic(300, 10), Synthetic(300, 20)};
  const auto r = PackMultiturn(two, 1024, 1);
  ASSERT_EQ(r.packs.size(), 1u);
  EXPECT_EQ(r.packs[0].segments.size(), 2u);
  EXPECT_EQ(r.dropped, 0u);

  const std::vector<TokenizedSample> big{Synthetic(1100, 5)};
  const auto d = PackMultiturn(big, 1024, 1);
  EXPECT_TRUE(d.packs.empty());
  EXPECT_EQ(d.dropped, 1u);
}

TEST(Packing, ConservationAndNoSplit) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenizedSample> samples;
    std::size_t kept_tokens = 0, kept = 0;
    const int max_len = 64 + int(rng.Below(200));
    for (int i = int(rng.Below(40)); i > 0; --i) {
      const int len = 2 + int(rng.Below(300));
      TokenizedSample s;
      for (int j = 0; j < len; ++j) s.ids.push_back(TokenId(rng.Below(256)));
      s.prefix_len = int(rng.Below(std::uint64_t(len)));
      if (len <= max_len) kept_tokens += std::size_t(len), ++kept;
      samples.push_back(std::move(s));
    }
    const auto r = PackMultiturn(samples, max_len, trial);
    EXPECT_EQ(r.dropped + kept, samples.size());
    std::size_t total = 0, segments = 0;
    for (const auto& p : r.packs) {
      EXPECT_LE(int(p.token_ids.size()), max_len);
      EXPECT_NO_THROW(ValidateSegments(p.segments, int(p.token_ids.size())));
      total += p.token_ids.size();
      segments += p.segments.size();
      // Each segment is one whole sample.
      for (const auto& seg : p.segments) {
        const std::vector<TokenId> body(p.token_ids.begin() + seg.start,
                                        p.token_ids.begin() + seg.end);
        EXPECT_TRUE(std::any_of(samples.begin(), samples.end(), [&](const TokenizedSample& s) {
          return s.ids == body && s.prefix_len == seg.prefix_len;
        }));
      }
    }
    EXPECT_EQ(total, kept_tokens);
    EXPECT_EQ(segments, kept);
  }
}

TEST(Tokenize, PrefixEndsAfterSpeechGptMarker) {
  const Vocabulary vocab(20);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const CrossModalSample s{i % 2 ? Task::kAsr : Task::kTts, "describe",
                             RandomReduced(rng, 1 + int(rng.Below(10)), 20),
                             std::string(1 + rng.Below(30), 'x')};
    const auto t = Tokenize(FormatCrossModal(s), vocab);
    const std::string prefix = vocab.DecodeToString(
        std::span<const TokenId>(t.ids).first(std::size_t(t.prefix_len)));
    EXPECT_TRUE(prefix.ends_with("[SpeechGPT]: ")) << prefix;
    EXPECT_EQ(vocab.DecodeToString(t.ids), FormatCrossModal(s).Full());
  }
  // Prefix length does not depend on the target content.
  CrossModalSample a{Task::kAsr, "d", {{1}, true}, "short"};
  CrossModalSample b = a;
  b.transcript = "a much longer transcript";
  EXPECT_EQ(Tokenize(FormatCrossModal(a), vocab).prefix_len,
            Tokenize(FormatCrossModal(b), vocab).prefix_len);
}

TEST(Chain, TemplatesSelectSegments) {
  const ChainQuadruplet q{{{1, 2}, true}, "what is up", "ok", {{3}, true}};
  const std::string si_tr = FormatChain(q, ChainFormat::kSiTr).response;
  EXPECT_NE(si_tr.find("[tq]"), std::string::npos);
  EXPECT_NE(si_tr.find("[ta]"), std::string::npos);
  EXPECT_EQ(si_tr.find("[ua]"), std::string::npos);
  EXPECT_EQ(ChainResponseText(q, ChainFormat::kTiTr), "[ta] ok<eoa>");
  EXPECT_EQ(ChainResponseText(q, ChainFormat::kSiSr),
            "[tq] what is up; [ta] ok; [ua] <u_{3}><eoa>");
  EXPECT_EQ(ChainResponseText(q, ChainFormat::kTiSr), "[ta] ok; [ua] <u_{3}><eoa>");
  for (ChainFormat f : kAllChainFormats) {
    EXPECT_TRUE(FormatChain(q, f).prompt.ends_with("[SpeechGPT]: "));
    EXPECT_EQ(ParseChainFormat(ChainFormatName(f)), f);
    EXPECT_EQ(FormatChain(q, f).Full(), FormatChain(q, f).prompt + ChainResponseText(q, f) + ".");
  }
  EXPECT_NE(FormatChain(q, ChainFormat::kSiTr).prompt.find("<u_{1}><u_{2}>"), std::string::npos);
}

TEST(Chain, ResponseWordFilter) {
  const std::vector<TextInstruction> items{
      {"a", std::string("w ") + std::string(34 * 2, 'x')},  // 2 words
      {"b", [] {
         std::string s;
         for (int i = 0; i < 35; ++i) s += "w ";
         return s;
       }()},
      {"c", [] {
         std::string s;
         for (int i = 0; i < 36; ++i) s += "w ";
         return s;
       }()}};
  const auto kept = FilterByResponseWords(items, 35);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[1].instruction, "b");
}

TEST(JsonLines, RoundTrips) {
  TempDir dir("jsonl");
  Rng rng(7);
  const std::vector<CrossModalSample> cross{
      {Task::kAsr, "d1", RandomReduced(rng, 4, 9), "hello \"quoted\""},
      {Task::kTts, "d2", RandomReduced(rng, 2, 9), "bye"}};
  SaveCrossModal(dir / "c.jsonl", cross);
  EXPECT_EQ(LoadCrossModal(dir / "c.jsonl", 9), cross);
  EXPECT_THROW(LoadCrossModal(dir / "c.jsonl", 2), Error);

  const std::vector<ChainRecord> chain{
      {ChainFormat::kSiSr, {RandomReduced(rng, 3, 9), "ti", "tr", RandomReduced(rng, 3, 9)}}};
  SaveChain(dir / "ch.jsonl", chain);
  const auto back = LoadChain(dir / "ch.jsonl", 9);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].format, ChainFormat::kSiSr);
  EXPECT_EQ(back[0].quad, chain[0].quad);

  const std::vector<PackedSequence> packs{{{1, 2, 3, 4}, {{0, 1, 2}, {2, 0, 4}}}};
  SavePacked(dir / "p.jsonl", packs);
  EXPECT_EQ(LoadPacked(dir / "p.jsonl", 10), packs);
  EXPECT_NE(Message([&] { LoadPacked(dir / "p.jsonl", 4); }).find("malformed packs"),
            std::string::npos);
  std::ofstream(dir / "bad.jsonl") << R"({"token_ids":[1,2],"segments":[[0,0,3]]})" << "\n";
  EXPECT_NE(Message([&] { LoadPacked(dir / "bad.jsonl", 10); }).find("malformed packs"),
            std::string::npos);
}

TEST(TextInstructions, BundledAreUsable) {
  const auto items = BundledTextInstructions();
  EXPECT_GE(items.size(), 20u);
  const Vocabulary vocab(4);
  for (const auto& t : items) {
    const auto s = Tokenize(FormatTextInstruction(t), vocab);
    EXPECT_LT(s.prefix_len, int(s.ids.size()));
  }
  EXPECT_EQ(FormatTextInstruction({"I", "R"}).Full(), "[Human]:I<eoh>.[SpeechGPT]: R<eos>.");
}

}  // namespace
}  // namespace unitlm
