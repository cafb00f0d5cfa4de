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

#include "global_config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "unitlm/error.hpp"

namespace unitlm::cli {
namespace {

using nlohmann::json;

// Reads fields of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) Bad(path_.empty() ? "top level" : path_, "must be an object");
  }

  template <typename T>
  bool Get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return false;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      Bad(Name(key), "has the wrong type");
    }
    return true;
  }

  Section Child(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    static const json kEmpty = json::object();
    return Section(it == obj_.end() ? kEmpty : *it, Name(key));
  }

  void Finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) Bad(Name(key), "is not a known config key");
    }
  }

 private:
  std::string Name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  [[noreturn]] static void Bad(const std::string& where, const std::string& what) {
    Fail(ErrorKind::kInvalidArgument, "config: " + where + " " + what);
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void ReadStage(Section s, StageSection& st, int stage) {
  auto& t = st.train;
  s.Get("batch_size", t.batch_size);
  s.Get("peak_lr", t.peak_lr);
  s.Get("max_len", t.max_len);
  s.Get("steps", t.steps);
  s.Get("warmup_steps", t.warmup_steps);
  s.Get("save_every", t.save_every);
  s.Get("clip_norm", t.clip_norm);
  st.seed_set = s.Get("seed", t.seed);
  if (stage == 2) {
    s.Get("cross_weight", st.cross_weight);
    s.Get("text_weight", st.text_weight);
  }
  if (stage == 3) {
    s.Get("lora_rank", t.lora->rank);
    s.Get("lora_alpha", t.lora->alpha);
  }
  s.Finish();
}

}  // namespace

GlobalConfig::GlobalConfig() {
  for (int s = 1; s <= 3; ++s) stage(s).train = StageConfig::Desk(s);
}

GlobalConfig GlobalConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open config: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kInvalidArgument, "config: not valid JSON: " + std::string(e.what()));
  }

  GlobalConfig c;
  Section top(doc, "");
  top.Get("seed", c.seed);
  top.Get("workers", c.workers);
  {
    Section f = top.Child("features");
    f.Get("sample_rate", c.features.sample_rate);
    f.Get("frame_length_ms", c.features.frame_length_ms);
    f.Get("frame_shift_ms", c.features.frame_shift_ms);
    f.Get("num_mel_bins", c.features.num_mel_bins);
    f.Get("low_freq", c.features.low_freq);
    f.Get("high_freq", c.features.high_freq);
    f.Get("log_floor", c.features.log_floor);
    f.Finish();
  }
  {
    Section u = top.Child("codebook");
    u.Get("k", c.k);
    u.Get("max_iters", c.kmeans_iters);
    u.Finish();
  }
  {
    Section d = top.Child("dataset");
    d.Get("p", c.p);
    d.Get("pack_max_len", c.pack_max_len);
    d.Get("max_response_words", c.max_response_words);
    d.Finish();
  }
  {
    Section m = top.Child("model");
    m.Get("layers", c.model.layers);
    m.Get("dim", c.model.dim);
    m.Get("heads", c.model.heads);
    m.Get("ffn_dim", c.model.ffn_dim);
    m.Get("max_len", c.model.max_len);
    m.Finish();
  }
  for (int s = 1; s <= 3; ++s) ReadStage(top.Child("stage" + std::to_string(s)), c.stage(s), s);
  {
    Section t = top.Child("t2u");
    t.Get("layers", c.t2u.model.layers);
    t.Get("dim", c.t2u.model.dim);
    t.Get("heads", c.t2u.model.heads);
    t.Get("ffn_dim", c.t2u.model.ffn_dim);
    t.Get("max_len", c.t2u.model.max_len);
    t.Get("batch_size", c.t2u.train.batch_size);
    t.Get("peak_lr", c.t2u.train.peak_lr);
    t.Get("steps", c.t2u.train.steps);
    t.Get("warmup_steps", c.t2u.train.warmup_steps);
    t.Get("max_units", c.t2u_max_units);
    t.Finish();
  }
  {
    Section s = top.Child("sampling");
    s.Get("temperature", c.sampling.temperature);
    s.Get("top_k", c.sampling.top_k);
    s.Get("top_p", c.sampling.top_p);
    s.Get("max_new_tokens", c.sampling.max_new_tokens);
    s.Finish();
  }
  {
    Section s = top.Child("synth");
    s.Get("repeat", c.synth.repeat);
    s.Get("griffin_lim_iters", c.synth.griffin_lim_iters);
    s.Finish();
  }
  {
    Section p = top.Child("paths");
    auto& x = c.paths;
    for (auto [key, field] : std::initializer_list<std::pair<const char*, std::string*>>{
             {"manifest", &x.manifest}, {"codebook", &x.codebook}, {"units", &x.units},
             {"t2u", &x.t2u}, {"dataset", &x.dataset}, {"init", &x.init},
             {"adapters", &x.adapters}, {"model", &x.model}, {"cross", &x.cross},
             {"text", &x.text}, {"chain", &x.chain}, {"prompts", &x.prompts},
             {"report", &x.report}, {"out", &x.out}, {"audio_out", &x.audio_out},
             {"text_instructions", &x.text_instructions}, {"asr_pool", &x.asr_pool},
             {"tts_pool", &x.tts_pool}, {"response", &x.response}}) {
      p.Get(key, *field);
    }
    p.Finish();
  }
  top.Finish();
  c.Validate();
  return c;
}

void GlobalConfig::Validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) Fail(ErrorKind::kInvalidArgument, "config: " + what);
  };
  need(workers >= 1, "workers must be >= 1");
  need(k >= 2, "codebook.k must be >= 2");
  need(kmeans_iters >= 1, "codebook.max_iters must be >= 1");
  need(p >= 0.0 && p <= 1.0, "dataset.p must lie in [0,1]");
  need(pack_max_len >= 2, "dataset.pack_max_len must be >= 2");
  need(max_response_words >= 1, "dataset.max_response_words must be >= 1");
  need(t2u_max_units >= 1, "t2u.max_units must be >= 1");
  need(synth.repeat >= 1 && synth.griffin_lim_iters >= 0, "synth settings out of range");
  need(sampling.temperature > 0.0 && sampling.top_k >= 1 && sampling.top_p > 0.0 &&
           sampling.top_p <= 1.0 && sampling.max_new_tokens >= 1,
       "sampling settings out of range");
  for (int s = 1; s <= 3; ++s) stages[s - 1].train.Validate();
  ModelConfig m = model;
  m.vocab_size = kBaseVocabSize + k;
  m.Validate();
}

}  // namespace unitlm::cli
