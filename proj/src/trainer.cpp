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

#include "unitlm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "unitlm/checkpoint.hpp"
#include "unitlm/error.hpp"
#include "unitlm/loss.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {
namespace {

std::filesystem::path StepPath(const std::filesystem::path& out, int step) {
  std::filesystem::path p = out;
  p += ".step" + std::to_string(step);
  return p;
}

bool SaveDue(const StageConfig& cfg, int completed) {
  return cfg.save_every > 0 && completed % cfg.save_every == 0 && completed < cfg.steps;
}

}  // namespace

void StageConfig::Validate() const {
  auto positive = [](long long v, const char* name) {
    if (v <= 0) Fail(ErrorKind::kInvalidArgument, std::string(name) + " must be positive");
  };
  if (stage < 1 || stage > 3) {
    Fail(ErrorKind::kInvalidArgument, "invalid stage " + std::to_string(stage));
  }
  positive(batch_size, "batch_size");
  positive(max_len, "max_len");
  positive(steps, "steps");
  positive(warmup_steps, "warmup_steps");
  if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) {
    Fail(ErrorKind::kInvalidArgument, "peak_lr must be positive");
  }
  if (warmup_steps >= steps - 1) {
    Fail(ErrorKind::kInvalidArgument, "warmup_steps must be below steps - 1");
  }
  if (save_every < 0) Fail(ErrorKind::kInvalidArgument, "save_every must be >= 0");
  if (stage == 3 && !lora) Fail(ErrorKind::kInvalidArgument, "missing lora config");
  if (stage != 3 && lora) {
    Fail(ErrorKind::kInvalidArgument, "lora config is only valid for stage 3");
  }
  if (lora && (lora->rank < 1 || !(lora->alpha > 0.0))) {
    Fail(ErrorKind::kInvalidArgument, "lora rank must be >= 1 and alpha > 0");
  }
}

StageConfig StageConfig::Desk(int stage) {
  StageConfig cfg;
  cfg.stage = stage;
  switch (stage) {
    case 1:
      cfg.steps = 500;
      cfg.max_len = 1024;
      break;
    case 2:
      cfg.steps = 1000;
      cfg.max_len = 512;
      break;
    case 3:
      cfg.steps = 1000;
      cfg.max_len = 1024;
      cfg.lora = LoraConfig{};
      break;
    default:
      Fail(ErrorKind::kInvalidArgument, "invalid stage " + std::to_string(stage));
  }
  cfg.warmup_steps = cfg.steps / 10;
  return cfg;
}

double LearningRate(const StageConfig& cfg, int step) {
  if (step <= 0) return 0.0;
  if (step < cfg.warmup_steps) return cfg.peak_lr * step / cfg.warmup_steps;
  if (step >= cfg.steps - 1) return 0.0;
  const double progress =
      double(step - cfg.warmup_steps) / double(cfg.steps - 1 - cfg.warmup_steps);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(std::vector<Tensor<float>*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

double Adam::Step(std::span<Tensor<float>* const> grads, double lr) {
  Require(grads.size() == params_.size(), "gradient list does not match parameters");
  double sq = 0.0;
  for (std::size_t t = 0; t < grads.size(); ++t) {
    Require(grads[t]->size() == params_[t]->size(), "gradient shape mismatch");
    for (float g : grads[t]->data) sq += double(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) Fail(ErrorKind::kData, "non-finite gradient");
  const double clip =
      cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t t = 0; t < params_.size(); ++t) {
    auto& p = params_[t]->data;
    const auto& g = grads[t]->data;
    auto& m = m_[t];
    auto& v = v_[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = double(g[i]) * clip;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      p[i] = float(double(p[i]) - lr * update);
    }
  }
  return norm;
}

void WriteReportJsonl(const std::filesystem::path& path, const TrainingRunReport& report) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write report: " + path.string());
  for (const auto& s : report.steps) {
    nlohmann::ordered_json line;
    line["step"] = s.step;
    line["loss"] = s.loss;
    line["lr"] = s.lr;
    out << line.dump() << "\n";
  }
}

BatchSampler::BatchSampler(std::vector<DataStream> streams, std::uint64_t seed)
    : seed_(seed) {
  for (auto& s : streams) {
    if (s.weight < 0) Fail(ErrorKind::kInvalidArgument, "stream weight must be >= 0");
    if (s.weight == 0 || s.sequences.empty()) continue;
    streams_.push_back(State{std::move(s), {}, 0, 0});
  }
  if (streams_.empty()) Fail(ErrorKind::kData, "empty corpus");
}

const PackedSequence* BatchSampler::Draw(State& s, std::size_t index) {
  if (s.cursor == s.order.size()) {
    s.order.resize(s.data.sequences.size());
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    Rng rng(Rng::Derive(seed_, (std::uint64_t(index) << 32) | s.epoch));
    rng.Shuffle(s.order);
    s.cursor = 0;
    ++s.epoch;
  }
  return &s.data.sequences[s.order[s.cursor++]];
}

std::vector<const PackedSequence*> BatchSampler::Next(int batch_size) {
  std::vector<const PackedSequence*> batch;
  batch.reserve(std::size_t(batch_size));
  while (int(batch.size()) < batch_size) {
    if (drawn_in_stream_ == streams_[stream_].data.weight) {
      stream_ = (stream_ + 1) % streams_.size();
      drawn_in_stream_ = 0;
    }
    batch.push_back(Draw(streams_[stream_], stream_));
    ++drawn_in_stream_;
  }
  return batch;
}

TrainingRunReport TrainLoop(Model& model, Lora* lora, const StageConfig& cfg,
                            BatchSampler& sampler, const StepCallback& on_step) {
  cfg.Validate();
  const auto start_time = std::chrono::steady_clock::now();
  const ModelConfig& mc = model.config();
  const int vocab = mc.vocab_size;

  ParameterSelection selection = TrainableParameters(model, lora, cfg.stage);
  ModelParams<float> model_grad;
  Lora lora_grad;
  std::vector<Tensor<float>*> grads;
  if (cfg.stage == 3) {
    lora_grad = Lora::Zeros(mc, lora->rank, lora->alpha);
    lora_grad.ForEach([&](Tensor<float>& t) { grads.push_back(&t); });
  } else {
    model_grad = ModelParams<float>::Zeros(mc);
    model_grad.ForEach([&](Tensor<float>& t) { grads.push_back(&t); });
  }
  Adam adam(selection.tensors, AdamConfig{.clip_norm = cfg.clip_norm});

  TrainingRunReport report;
  report.stage = cfg.stage;
  report.trainable_parameters = selection.Count();
  std::vector<float> d_logits;
  ForwardCache<float> cache;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto batch = sampler.Next(cfg.batch_size);
    std::size_t scored = 0;
    for (const auto* ex : batch) scored += TargetPositions(ex->segments).size();
    if (scored == 0) Fail(ErrorKind::kData, "empty target");

    for (auto* g : grads) std::fill(g->data.begin(), g->data.end(), 0.0f);
    double loss_sum = 0.0;
    for (const auto* ex : batch) {
      const auto logits = model.Forward(ex->token_ids, lora, cache);
      d_logits.assign(logits.size(), 0.0f);
      const NllSum s = MaskedNllSum<float>(logits, vocab, ex->token_ids, ex->segments,
                                           d_logits, 1.0 / double(scored));
      loss_sum += s.sum;
      model.Backward(cache, d_logits, lora, cfg.stage == 3 ? nullptr : &model_grad,
                     cfg.stage == 3 ? &lora_grad : nullptr);
    }
    const double loss = loss_sum / double(scored);
    if (!std::isfinite(loss)) {
      Fail(ErrorKind::kData, "non-finite loss at step " + std::to_string(step));
    }
    const double lr = LearningRate(cfg, step);
    adam.Step(grads, lr);
    report.steps.push_back({step, loss, lr});
    if (on_step) on_step(step + 1);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

void ValidatePacks(std::span<const PackedSequence> packs, int max_len, int vocab_size) {
  for (std::size_t i = 0; i < packs.size(); ++i) {
    const auto& p = packs[i];
    const std::string where = " (pack " + std::to_string(i) + ")";
    if (p.token_ids.empty()) Fail(ErrorKind::kData, "malformed packs: empty pack" + where);
    if (int(p.token_ids.size()) > max_len) {
      Fail(ErrorKind::kData, "malformed packs: pack longer than max_len" + where);
    }
    for (TokenId id : p.token_ids) {
      if (id < 0 || id >= vocab_size) {
        Fail(ErrorKind::kData, "malformed packs: token id out of range" + where);
      }
    }
    try {
      ValidateSegments(p.segments, int(p.token_ids.size()));
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.starts_with("empty target")) Fail(ErrorKind::kData, msg + where);
      Fail(ErrorKind::kData, "malformed packs: " + msg + where);
    }
    if (TargetPositions(p.segments).empty()) Fail(ErrorKind::kData, "empty target" + where);
  }
}

StageResult RunStage1(std::span<const UnitFile> corpus, ModelConfig model_cfg,
                      const StageConfig& cfg, const std::filesystem::path& out) {
  cfg.Validate();
  if (cfg.stage != 1) Fail(ErrorKind::kInvalidArgument, "stage-1 runner needs stage 1");
  if (corpus.empty()) Fail(ErrorKind::kData, "empty corpus");
  const int k = corpus.front().k;
  for (const auto& f : corpus) {
    if (f.k != k) Fail(ErrorKind::kData, "unit files disagree on K");
  }
  const Vocabulary vocab(k);
  if (model_cfg.vocab_size == 0) model_cfg.vocab_size = vocab.total_size();
  if (model_cfg.vocab_size != vocab.total_size()) {
    Fail(ErrorKind::kInvalidArgument, "model vocab_size does not match 264 + K");
  }
  model_cfg.Validate();
  const int window = std::min(cfg.max_len, model_cfg.max_len);

  std::vector<PackedSequence> sequences;
  std::size_t dropped = 0;
  for (const auto& f : corpus) {
    for (const auto& utt : f.utterances) {
      const UnitSequence reduced = utt.reduced ? utt : Deduplicate(utt);
      ValidateUnits(reduced, k);
      for (std::size_t begin = 0; begin < reduced.units.size(); begin += window) {
        const std::size_t end = std::min(reduced.units.size(), begin + window);
        if (end - begin < 2) {
          ++dropped;
          continue;
        }
        PackedSequence seq;
        for (std::size_t i = begin; i < end; ++i) {
          seq.token_ids.push_back(vocab.UnitId(reduced.units[i]));
        }
        seq.segments.push_back({0, 0, int(seq.token_ids.size())});
        sequences.push_back(std::move(seq));
      }
    }
  }
  if (sequences.empty()) Fail(ErrorKind::kData, "empty corpus");

  Model model = Model::Init(model_cfg, Rng::Derive(cfg.seed, 1));
  BatchSampler sampler({DataStream{std::move(sequences), 1}}, Rng::Derive(cfg.seed, 2));
  auto report = TrainLoop(model, nullptr, cfg, sampler, [&](int done) {
    if (!out.empty() && SaveDue(cfg, done)) SaveCheckpoint(StepPath(out, done), model);
  });
  report.dropped = dropped;
  if (!out.empty()) {
    SaveCheckpoint(out, model);
    report.checkpoint_path = out;
  }
  return {std::move(model), std::move(report)};
}

StageResult RunStage2(Model model, std::vector<PackedSequence> cross_modal,
                      std::vector<PackedSequence> text, const StageConfig& cfg,
                      const std::filesystem::path& out, int cross_weight, int text_weight) {
  cfg.Validate();
  if (cfg.stage != 2) Fail(ErrorKind::kInvalidArgument, "stage-2 runner needs stage 2");
  const ModelConfig& mc = model.config();
  const int max_len = std::min(cfg.max_len, mc.max_len);
  ValidatePacks(cross_modal, max_len, mc.vocab_size);
  ValidatePacks(text, max_len, mc.vocab_size);
  if (cross_modal.empty() && text.empty()) Fail(ErrorKind::kData, "empty corpus");

  BatchSampler sampler({DataStream{std::move(cross_modal), cross_weight},
                        DataStream{std::move(text), text_weight}},
                       Rng::Derive(cfg.seed, 2));
  auto report = TrainLoop(model, nullptr, cfg, sampler, [&](int done) {
    if (!out.empty() && SaveDue(cfg, done)) SaveCheckpoint(StepPath(out, done), model);
  });
  if (!out.empty()) {
    SaveCheckpoint(out, model);
    report.checkpoint_path = out;
  }
  return {std::move(model), std::move(report)};
}

AdapterResult RunStage3(Model& base, std::vector<PackedSequence> chain,
                        const StageConfig& cfg, const std::filesystem::path& out) {
  cfg.Validate();
  if (cfg.stage != 3) Fail(ErrorKind::kInvalidArgument, "stage-3 runner needs stage 3");
  const ModelConfig& mc = base.config();
  ValidatePacks(chain, std::min(cfg.max_len, mc.max_len), mc.vocab_size);
  if (chain.empty()) Fail(ErrorKind::kData, "empty corpus");

  const std::string before = ParameterSha256(base);
  Lora lora = Lora::Init(mc, cfg.lora->rank, cfg.lora->alpha, Rng::Derive(cfg.seed, 3));
  BatchSampler sampler({DataStream{std::move(chain), 1}}, Rng::Derive(cfg.seed, 2));
  auto report = TrainLoop(base, &lora, cfg, sampler, [&](int done) {
    if (!out.empty() && SaveDue(cfg, done)) SaveAdapters(StepPath(out, done), mc, lora);
  });
  report.base_hash_before = before;
  report.base_hash_after = ParameterSha256(base);
  if (report.base_hash_after != before) {
    Fail(ErrorKind::kInternal, "base weights changed during adapter training");
  }
  if (!out.empty()) {
    SaveAdapters(out, mc, lora);
    report.checkpoint_path = out;
  }
  return {std::move(lora), std::move(report)};
}

}  // namespace unitlm
