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

#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "test_support.hpp"
#include "unitlm/checkpoint.hpp"
#include "unitlm/error.hpp"
#include "unitlm/trainer.hpp"

namespace unitlm {
namespace {

using testing::RandomReduced;
using testing::TempDir;
using testing::TinyConfig;

std::string Message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

StageConfig Small(int stage, int steps) {
  StageConfig c;
  c.stage = stage;
  c.batch_size = 4;
  c.peak_lr = 3e-3;
  c.steps = steps;
  c.warmup_steps = std::max(1, steps / 10);
  c.max_len = 64;
  c.seed = 5;
  if (stage == 3) c.lora = LoraConfig{};
  return c;
}

UnitFile Corpus(int n, int len, int k, std::uint64_t seed) {
  Rng rng(seed);
  UnitFile f{k, true, {}};
  for (int i = 0; i < n; ++i) f.utterances.push_back(RandomReduced(rng, len, k));
  return f;
}

// The window of losses over a fraction of the run.
double MeanOf(const TrainingRunReport& r, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += r.steps[i].loss;
  return s / double(end - begin);
}

double MinOf(const TrainingRunReport& r, std::size_t begin, std::size_t end) {
  double m = INFINITY;
  for (std::size_t i = begin; i < end; ++i) m = std::min(m, r.steps[i].loss);
  return m;
}

TEST(Schedule, WarmupThenCosine) {
  StageConfig c = Small(1, 500);
  c.warmup_steps = 50;
  c.peak_lr = 2e-4;
  EXPECT_EQ(LearningRate(c, 0), 0.0);
  EXPECT_DOUBLE_EQ(LearningRate(c, 50), 2e-4);
  EXPECT_LE(LearningRate(c, 499), 1e-6 * 2e-4);
  for (int s = 1; s <= 50; ++s) EXPECT_GT(LearningRate(c, s), LearningRate(c, s - 1));
  for (int s = 51; s < 500; ++s) EXPECT_LE(LearningRate(c, s), LearningRate(c, s - 1));
}

TEST(StageConfig, Validation) {
  StageConfig c = Small(3, 10);
  c.lora.reset();
  EXPECT_NE(Message([&] { c.Validate(); }).find("missing lora config"), std::string::npos);
  c = Small(1, 10);
  c.lora = LoraConfig{};
  EXPECT_THROW(c.Validate(), Error);
  c = Small(1, 10);
  c.warmup_steps = 9;
  EXPECT_THROW(c.Validate(), Error);
  c = Small(4, 10);
  EXPECT_THROW(c.Validate(), Error);
  c = Small(2, 10);
  c.batch_size = 0;
  EXPECT_THROW(c.Validate(), Error);

  const auto d1 = StageConfig::Desk(1), d2 = StageConfig::Desk(2), d3 = StageConfig::Desk(3);
  EXPECT_EQ(d1.steps, 500);
  EXPECT_EQ(d2.steps, 1000);
  EXPECT_EQ(d3.steps, 1000);
  EXPECT_EQ(d1.max_len, 1024);
  EXPECT_EQ(d2.max_len, 512);
  EXPECT_EQ(d3.batch_size, 16);
  ASSERT_TRUE(d3.lora);
  EXPECT_EQ(d3.lora->rank, 8);
  EXPECT_EQ(d3.lora->alpha, 16.0);
  EXPECT_NO_THROW(d3.Validate());
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor<float> p("p", 1, 3), g("g", 1, 3);
  p.data = {1.0f, 2.0f, 3.0f};
  g.data = {0.5f, -0.01f, 0.0f};
  Adam adam({&p}, AdamConfig{.clip_norm = 0.0});
  Tensor<float>* grads[] = {&g};
  const double norm = adam.Step(grads, 0.1);
  EXPECT_NEAR(norm, std::sqrt(0.25 + 0.0001), 1e-7);
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.data[0], 0.9f, 1e-6);
  EXPECT_NEAR(p.data[1], 2.1f, 1e-5);
  EXPECT_EQ(p.data[2], 3.0f);
}

TEST(Adam, ClippingBoundsTheUpdateScale) {
  Tensor<float> p("p", 1, 2), g("g", 1, 2);
  g.data = {300.0f, 400.0f};
  Adam adam({&p}, AdamConfig{});
  Tensor<float>* grads[] = {&g};
  EXPECT_NEAR(adam.Step(grads, 0.0), 500.0, 1e-9);
  EXPECT_EQ(adam.steps_taken(), 1);
  EXPECT_THROW(adam.Step(std::span<Tensor<float>* const>(), 0.1), Error);
}

TEST(BatchSampler, InterleavesByWeightAndCoversEpochs) {
  std::vector<PackedSequence> a(3), b(5);
  for (int i = 0; i < 3; ++i) a[std::size_t(i)].token_ids = {i};
  for (int i = 0; i < 5; ++i) b[std::size_t(i)].token_ids = {100 + i};
  BatchSampler s({DataStream{a, 2}, DataStream{b, 1}}, 9);
  std::map<int, int> count;
  std::vector<bool> from_a;
  for (int i = 0; i < 30; ++i) {
    const int id = s.Next(1)[0]->token_ids[0];
    from_a.push_back(id < 100);
    ++count[id];
  }
  for (int i = 0; i < 30; ++i) EXPECT_EQ(from_a[std::size_t(i)], i % 3 != 2) << i;
  // 20 draws from a: every item 6 or 7 times (epochs of 3); 10 from b: twice each.
  for (int i = 0; i < 3; ++i) EXPECT_GE(count[i], 6);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(count[100 + i], 2);

  BatchSampler again({DataStream{a, 2}, DataStream{b, 1}}, 9);
  BatchSampler fresh({DataStream{a, 2}, DataStream{b, 1}}, 9);
  for (int i = 0; i < 10; ++i) {
    const auto x = again.Next(3), y = fresh.Next(3);
    for (int j = 0; j < 3; ++j) EXPECT_EQ(x[std::size_t(j)]->token_ids, y[std::size_t(j)]->token_ids);
  }
  EXPECT_THROW(BatchSampler({DataStream{{}, 1}}, 1), Error);
}

TEST(Stage1, InitialLossNearUniformAndDeterministic) {
  const UnitFile f = Corpus(6, 20, 100, 1);
  const StageConfig c = Small(1, 30);
  const auto a = RunStage1(std::span(&f, 1), TinyConfig(100, 32, 2, 64), c, {});
  const auto b = RunStage1(std::span(&f, 1), TinyConfig(100, 32, 2, 64), c, {});
  const double ln_v = std::log(364.0);
  EXPECT_NEAR(a.report.steps[0].loss, ln_v, 0.1 * ln_v);
  ASSERT_EQ(a.report.steps.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(a.report.steps[i].loss, b.report.steps[i].loss);
  EXPECT_EQ(ParameterSha256(a.model), ParameterSha256(b.model));
  EXPECT_EQ(a.report.trainable_parameters, a.model.params().Count());
}

TEST(Stage1, ProgressAndCheckpoints) {
  TempDir dir("s1");
  UnitFile f = Corpus(6, 20, 50, 2);
  f.utterances.push_back({{7}, true});  // too short for a window, counted as dropped
  StageConfig c = Small(1, 100);
  c.save_every = 50;
  const auto r = RunStage1(std::span(&f, 1), TinyConfig(50, 32, 2, 64), c, dir / "m.bin");
  EXPECT_EQ(r.report.dropped, 1u);
  EXPECT_LT(MinOf(r.report, 90, 100), MeanOf(r.report, 0, 10));
  EXPECT_TRUE(std::filesystem::exists(dir / "m.bin.step50"));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.bin.step100"));  // the final save is m.bin
  EXPECT_EQ(r.report.checkpoint_path, dir / "m.bin");
  EXPECT_EQ(ParameterSha256(LoadCheckpoint(dir / "m.bin")), ParameterSha256(r.model));

  WriteReportJsonl(dir / "r.jsonl", r.report);
  std::ifstream in(dir / "r.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["step"], n);
    EXPECT_TRUE(j.contains("loss") && j.contains("lr"));
    ++n;
  }
  EXPECT_EQ(n, 100);
}

TEST(Stage1, RejectsEmptyCorpus) {
  const UnitFile f{10, true, {}};
  EXPECT_THROW(RunStage1(std::span(&f, 1), TinyConfig(10, 16, 1, 32), Small(1, 10), {}), Error);
}

PackedSequence Pack(Rng& rng, int len, int prefix, int vocab) {
  PackedSequence p;
  for (int i = 0; i < len; ++i) p.token_ids.push_back(TokenId(rng.Below(std::uint64_t(vocab))));
  p.segments.push_back({0, prefix, len});
  return p;
}

TEST(Stage2, FullPrefixIsRejectedBeforeTraining) {
  const ModelConfig mc = TinyConfig(10, 16, 1, 32);
  Rng rng(3);
  std::vector<PackedSequence> packs{Pack(rng, 10, 3, mc.vocab_size)};
  packs.push_back(Pack(rng, 8, 8, mc.vocab_size));
  const auto msg = Message([&] { RunStage2(Model::Init(mc, 1), packs, {}, Small(2, 10), {}); });
  EXPECT_NE(msg.find("empty target"), std::string::npos) << msg;

  std::vector<PackedSequence> bad{Pack(rng, 10, 0, mc.vocab_size)};
  bad[0].segments[0].end = 9;
  EXPECT_NE(Message([&] { RunStage2(Model::Init(mc, 1), bad, {}, Small(2, 10), {}); })
                .find("malformed packs"),
            std::string::npos);
}

TEST(Stage2, PrefixDuplicationKeepsScoredCount) {
  // Doubling the prefix content shifts the targets but adds no loss terms.
  const std::vector<SegmentSpan> a{{0, 4, 10}};
  const std::vector<SegmentSpan> b{{0, 8, 14}};
  EXPECT_EQ(TargetPositions(a).size(), TargetPositions(b).size());
}

// Twenty packed ASR/TTS samples memorized by a tiny model.
TEST(Stage2, MemorizesCrossModalSamples) {
  const int k = 20;
  const Vocabulary vocab(k);
  Rng rng(4);
  static const char* kWords[] = {"red", "blue", "cat", "dog", "sun", "moon", "tree", "fish"};
  std::vector<TokenizedSample> samples;
  for (int i = 0; i < 20; ++i) {
    const CrossModalSample s{i % 2 ? Task::kAsr : Task::kTts, i % 2 ? "asr" : "tts",
                             RandomReduced(rng, 6, k),
                             std::string(kWords[rng.Below(8)]) + " " + kWords[rng.Below(8)]};
    samples.push_back(Tokenize(FormatCrossModal(s), vocab));
  }
  const auto packed = PackMultiturn(samples, 128, 1);
  ASSERT_EQ(packed.dropped, 0u);
  const ModelConfig mc = TinyConfig(k, 64, 2, 128);
  StageConfig c = Small(2, 1000);
  c.max_len = 128;
  c.batch_size = 2;
  const auto r = RunStage2(Model::Init(mc, 2), packed.packs, {}, c, {});
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : packed.packs) {
    const auto logits = r.model.Forward(p.token_ids);
    const NllSum s = MaskedNllSum<float>(logits, mc.vocab_size, p.token_ids, p.segments);
    sum += s.sum;
    count += s.count;
  }
  EXPECT_LT(sum / double(count), 0.2);
  EXPECT_LT(MinOf(r.report, 900, 1000), MeanOf(r.report, 0, 100));
}

TEST(Stage3, FreezesBaseAndCountsAdapters) {
  TempDir dir("s3");
  const ModelConfig mc = TinyConfig(10, 32, 2, 64);
  Model base = Model::Init(mc, 6);
  const std::string before = ParameterSha256(base);
  Rng rng(7);
  std::vector<PackedSequence> packs;
  for (int i = 0; i < 4; ++i) packs.push_back(Pack(rng, 30, 10, mc.vocab_size));
  const auto r = RunStage3(base, packs, Small(3, 40), dir / "a.bin");
  EXPECT_EQ(ParameterSha256(base), before);
  EXPECT_EQ(r.report.base_hash_before, before);
  EXPECT_EQ(r.report.base_hash_after, before);
  Lora probe = Lora::Zeros(mc, 8, 16.0);
  EXPECT_EQ(r.report.trainable_parameters, TrainableParameters(base, &probe, 3).Count());
  EXPECT_EQ(r.adapters.rank, 8);
  EXPECT_EQ(r.adapters.alpha, 16.0);
  EXPECT_LT(r.report.steps.back().loss, r.report.steps.front().loss);
  const Lora loaded = LoadAdapters(dir / "a.bin", mc);
  EXPECT_EQ(base.Forward(packs[0].token_ids, &loaded),
            base.Forward(packs[0].token_ids, &r.adapters));

  StageConfig no_lora = Small(3, 10);
  no_lora.lora.reset();
  EXPECT_NE(Message([&] { RunStage3(base, packs, no_lora, {}); }).find("missing lora config"),
            std::string::npos);
}

}  // namespace
}  // namespace unitlm
