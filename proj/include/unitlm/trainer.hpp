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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unitlm/speechinstruct.hpp"
#include "unitlm/transformer.hpp"
#include "unitlm/units.hpp"

namespace unitlm {

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
};

struct StageConfig {
  int stage = 1;
  int batch_size = 16;
  double peak_lr = 2e-4;
  int max_len = 1024;
  int steps = 500;
  int warmup_steps = 50;
  std::uint64_t seed = 0;
  std::optional<LoraConfig> lora;  // present iff stage == 3
  int save_every = 0;              // 0 disables intermediate checkpoints
  double clip_norm = 1.0;

  void Validate() const;

  // Desk-scale profile: 500/1000/1000 steps, batch 16, max_len 1024/512/1024.
  static StageConfig Desk(int stage);
};

// Linear warmup from 0 at step 0 to peak_lr at warmup_steps, then cosine
// decay reaching 0 at step steps-1.
double LearningRate(const StageConfig& cfg, int step);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Adam with bias correction and global-norm gradient clipping. `params` and
// the gradients passed to Step are parallel lists of equally shaped tensors.
class Adam {
 public:
  Adam(std::vector<Tensor<float>*> params, AdamConfig cfg);

  // Returns the global gradient norm before clipping.
  double Step(std::span<Tensor<float>* const> grads, double lr);
  int steps_taken() const { return t_; }

 private:
  std::vector<Tensor<float>*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int t_ = 0;
};

struct StepLog {
  int step = 0;
  double loss = 0.0;  // mean masked NLL of the batch before the update
  double lr = 0.0;
};

struct TrainingRunReport {
  int stage = 0;
  std::vector<StepLog> steps;
  std::filesystem::path checkpoint_path;
  std::size_t dropped = 0;
  double wall_seconds = 0.0;
  std::size_t trainable_parameters = 0;
  std::string base_hash_before;  // stage 3 only
  std::string base_hash_after;
};

// One JSON object per line: {"step","loss","lr"}.
void WriteReportJsonl(const std::filesystem::path& path, const TrainingRunReport& report);

// A stream of training sequences and its share of each interleaving cycle.
struct DataStream {
  std::vector<PackedSequence> sequences;
  int weight = 1;
};

// Draws examples cyclically: `weight` from stream 0, then `weight` from
// stream 1, and so on. Each stream is visited in seeded shuffled epochs.
class BatchSampler {
 public:
  BatchSampler(std::vector<DataStream> streams, std::uint64_t seed);
  std::vector<const PackedSequence*> Next(int batch_size);

 private:
  struct State {
    DataStream data;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::uint64_t epoch = 0;
  };
  const PackedSequence* Draw(State& s, std::size_t index);

  std::vector<State> streams_;
  std::uint64_t seed_;
  std::size_t stream_ = 0;
  int drawn_in_stream_ = 0;
};

// Called after each optimizer step with the number of completed steps.
using StepCallback = std::function<void(int completed_steps)>;

// Trains the stage's parameter selection on sequences from `sampler`.
// Sequences must already be validated against the model's max_len.
TrainingRunReport TrainLoop(Model& model, Lora* lora, const StageConfig& cfg,
                            BatchSampler& sampler, const StepCallback& on_step = {});

struct StageResult {
  Model model;
  TrainingRunReport report;
};

// Stage 1: unmasked next-token prediction over unit-only sequences. Utterances
// are reduced if needed and cut into windows of at most cfg.max_len tokens;
// windows shorter than two tokens are dropped and counted. An empty `out`
// skips writing checkpoints.
StageResult RunStage1(std::span<const UnitFile> corpus, ModelConfig model_cfg,
                      const StageConfig& cfg, const std::filesystem::path& out);

// Stage 2: prefix-masked loss over packed instruction data. The two streams
// are interleaved at cross_weight:text_weight.
StageResult RunStage2(Model model, std::vector<PackedSequence> cross_modal,
                      std::vector<PackedSequence> text, const StageConfig& cfg,
                      const std::filesystem::path& out, int cross_weight = 1,
                      int text_weight = 1);

struct AdapterResult {
  Lora adapters;
  TrainingRunReport report;
};

// Stage 3: LoRA-only training on chain-formatted packs; base weights frozen.
AdapterResult RunStage3(Model& base, std::vector<PackedSequence> chain,
                        const StageConfig& cfg, const std::filesystem::path& out);

// Throws "malformed packs" / "empty target" errors before any training.
void ValidatePacks(std::span<const PackedSequence> packs, int max_len, int vocab_size);

}  // namespace unitlm
