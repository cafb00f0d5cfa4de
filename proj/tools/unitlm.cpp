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

// unitlm command-line driver. Results go to stdout as JSON, progress to
// stderr. Exit codes: 0 success, 1 usage, 2 data, 3 internal.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>

#include "CLI11.hpp"
#include "global_config.hpp"
#include "json.hpp"
#include "unitlm/chain.hpp"
#include "unitlm/checkpoint.hpp"
#include "unitlm/error.hpp"
#include "unitlm/kernels.hpp"
#include "unitlm/rng.hpp"
#include "unitlm/speechinstruct.hpp"
#include "unitlm/t2u.hpp"
#include "unitlm/trainer.hpp"
#include "unitlm/units.hpp"

#ifndef UNITLM_VERSION
#define UNITLM_VERSION "0.0.0"
#endif

namespace unitlm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void Progress(const std::string& msg) { std::cerr << "unitlm: " << msg << std::endl; }

void Emit(const ordered_json& doc) { std::cout << doc.dump() << std::endl; }

const std::string& Need(const std::string& value, const char* flag) {
  if (value.empty()) Fail(ErrorKind::kInvalidArgument, std::string("missing required ") + flag);
  return value;
}

fs::path Resolve(const fs::path& base_file, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_file.parent_path() / path;
}

// Features for every manifest entry, in manifest order.
std::vector<FeatureFrames> ManifestFeatures(const GlobalConfig& c,
                                            const std::vector<ManifestRecord>& recs) {
  const fs::path manifest = c.paths.manifest;
  std::vector<FeatureFrames> out;
  out.reserve(recs.size());
  for (const auto& r : recs) {
    out.push_back(ComputeFrames(LoadWav(Resolve(manifest, r.audio_path)), c.features));
  }
  return out;
}

UnitSequence ParseUnitList(const std::string& text) {
  UnitSequence seq;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      const int u = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      seq.units.push_back(u);
    } catch (const std::exception&) {
      Fail(ErrorKind::kInvalidArgument, "bad unit value: " + tok);
    }
  }
  return seq;
}

StageConfig StageFor(GlobalConfig& c, int stage) {
  StageConfig s = c.stage(stage).train;
  if (!c.stage(stage).seed_set) s.seed = c.seed;
  return s;
}

int UnitCount(const Model& m) { return m.config().vocab_size - kBaseVocabSize; }

// ---- subcommands -----------------------------------------------------------

void TrainCodebookCmd(GlobalConfig& c) {
  const auto recs = LoadManifest(Need(c.paths.manifest, "--manifest"));
  Progress("features for " + std::to_string(recs.size()) + " files");
  const auto frames = ManifestFeatures(c, recs);
  const auto r = TrainCodebook(frames, {.k = c.k, .seed = c.seed, .max_iters = c.kmeans_iters});
  r.codebook.Save(Need(c.paths.out, "--out"));
  Emit({{"codebook", c.paths.out},
        {"k", r.codebook.k()},
        {"dim", r.codebook.dim()},
        {"iterations", r.iterations},
        {"inertia", r.inertia.back()},
        {"sha256", FileSha256(c.paths.out)}});
}

void ExtractUnitsCmd(GlobalConfig& c) {
  const auto recs = LoadManifest(Need(c.paths.manifest, "--manifest"));
  const Codebook cb = Codebook::Load(Need(c.paths.codebook, "--codebook"));
  const auto frames = ManifestFeatures(c, recs);
  UnitFile f{cb.k(), true, {}};
  std::size_t total = 0;
  for (const auto& fr : frames) {
    f.utterances.push_back(Deduplicate(Quantize(fr, cb)));
    total += f.utterances.back().units.size();
  }
  SaveUnitFile(Need(c.paths.out, "--out"), f);
  Emit({{"units", c.paths.out},
        {"utterances", f.utterances.size()},
        {"total_units", total},
        {"sha256", FileSha256(c.paths.out)}});
}

std::vector<TextToUnitPair> AlignedPairs(const GlobalConfig& c) {
  const auto recs = LoadManifest(Need(c.paths.manifest, "--manifest"));
  const UnitFile uf = LoadUnitFile(Need(c.paths.units, "--units"));
  if (uf.utterances.size() != recs.size()) {
    Fail(ErrorKind::kData, "misaligned inputs: manifest has " + std::to_string(recs.size()) +
                               " records, unit file has " +
                               std::to_string(uf.utterances.size()));
  }
  std::vector<TextToUnitPair> pairs;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    pairs.push_back({recs[i].transcript, uf.utterances[i]});
  }
  return pairs;
}

void TrainT2uCmd(GlobalConfig& c) {
  const auto pairs = AlignedPairs(c);
  const UnitFile uf = LoadUnitFile(c.paths.units);
  TextToUnitConfig cfg = c.t2u;
  cfg.train.seed = c.seed;
  cfg.train.max_len = cfg.model.max_len;
  Progress("training text-to-unit generator on " + std::to_string(pairs.size()) + " pairs");
  const auto r = TrainTextToUnit(pairs, uf.k, cfg);
  SaveCheckpoint(Need(c.paths.out, "--out"), r.model);
  if (!c.paths.report.empty()) WriteReportJsonl(c.paths.report, r.report);
  Emit({{"model", c.paths.out},
        {"final_loss", r.report.steps.back().loss},
        {"dropped", r.report.dropped},
        {"sha256", FileSha256(c.paths.out)}});
}

void BuildDatasetCmd(GlobalConfig& c) {
  const auto recs = LoadManifest(Need(c.paths.manifest, "--manifest"));
  const UnitFile uf = LoadUnitFile(Need(c.paths.units, "--units"));
  const fs::path dir = Need(c.paths.out, "--out");
  fs::create_directories(dir);
  const Vocabulary vocab(uf.k);
  vocab.SaveManifest(dir / "vocab.json");

  DescriptionPools pools = DescriptionPools::Bundled();
  if (!c.paths.asr_pool.empty()) pools.asr = DescriptionPools::LoadPool(c.paths.asr_pool);
  if (!c.paths.tts_pool.empty()) pools.tts = DescriptionPools::LoadPool(c.paths.tts_pool);
  const auto cross = BuildCrossModal(recs, uf.utterances, pools, c.p, Rng::Derive(c.seed, 1));
  SaveCrossModal(dir / "cross_modal.jsonl", cross);

  std::vector<TokenizedSample> cross_tok;
  for (const auto& s : cross) cross_tok.push_back(Tokenize(FormatCrossModal(s), vocab));
  const auto cross_packs = PackMultiturn(cross_tok, c.pack_max_len, Rng::Derive(c.seed, 2));
  SavePacked(dir / "cross_modal.packed.jsonl", cross_packs.packs);

  const auto texts = c.paths.text_instructions.empty()
                         ? BundledTextInstructions()
                         : LoadTextInstructions(c.paths.text_instructions);
  std::vector<TokenizedSample> text_tok;
  for (const auto& t : texts) text_tok.push_back(Tokenize(FormatTextInstruction(t), vocab));
  const auto text_packs = PackMultiturn(text_tok, c.pack_max_len, Rng::Derive(c.seed, 3));
  SavePacked(dir / "text.packed.jsonl", text_packs.packs);

  ordered_json summary{{"dataset", dir.string()},
                       {"cross_modal", cross.size()},
                       {"asr", std::size_t(std::count_if(cross.begin(), cross.end(), [](const auto& s) {
                         return s.task == Task::kAsr;
                       }))},
                       {"cross_modal_packs", cross_packs.packs.size()},
                       {"cross_modal_dropped", cross_packs.dropped},
                       {"text_packs", text_packs.packs.size()},
                       {"text_dropped", text_packs.dropped}};

  if (!c.paths.t2u.empty()) {
    const Model gen = LoadCheckpoint(c.paths.t2u);
    if (UnitCount(gen) != uf.k) Fail(ErrorKind::kData, "text-to-unit generator K mismatch");
    const auto kept = FilterByResponseWords(texts, c.max_response_words);
    std::vector<ChainRecord> chain;
    std::size_t failed = 0;
    Progress("generating speech for " + std::to_string(kept.size()) + " instructions");
    for (const auto& t : kept) {
      ChainQuadruplet q;
      try {
        q = {TextToUnits(t.instruction, gen, SamplingConfig::Greedy(), c.t2u_max_units),
             t.instruction, t.response,
             TextToUnits(t.response, gen, SamplingConfig::Greedy(), c.t2u_max_units)};
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kData) throw;
        ++failed;
        continue;
      }
      for (ChainFormat f : kAllChainFormats) chain.push_back({f, q});
    }
    SaveChain(dir / "chain.jsonl", chain);
    // One chain sample per pack: stage 3 trains on single-turn prompts.
    PackResult chain_packs;
    for (const auto& r : chain) {
      const auto t = Tokenize(FormatChain(r.quad, r.format), vocab);
      if (int(t.ids.size()) > c.pack_max_len) {
        ++chain_packs.dropped;
        continue;
      }
      chain_packs.packs.push_back({t.ids, {{0, t.prefix_len, int(t.ids.size())}}});
    }
    SavePacked(dir / "chain.packed.jsonl", chain_packs.packs);
    summary["chain"] = chain.size();
    summary["chain_filtered"] = texts.size() - kept.size();
    summary["chain_generation_failed"] = failed;
    summary["chain_packs"] = chain_packs.packs.size();
    summary["chain_dropped"] = chain_packs.dropped;
  }
  Emit(summary);
}

void TrainCmd(GlobalConfig& c, int stage) {
  const StageConfig cfg = StageFor(c, stage);
  const fs::path out = Need(c.paths.out, "--out");
  Progress("stage " + std::to_string(stage) + ": " + std::to_string(cfg.steps) + " steps");
  TrainingRunReport report;
  std::string artifact_hash;
  if (stage == 1) {
    const UnitFile uf = LoadUnitFile(Need(c.paths.units, "--units"));
    ModelConfig mc = c.model;
    mc.vocab_size = kBaseVocabSize + uf.k;
    auto r = RunStage1(std::span(&uf, 1), mc, cfg, out);
    report = std::move(r.report);
  } else {
    Model base = LoadCheckpoint(Need(c.paths.init, "--init"));
    const int vocab = base.config().vocab_size;
    if (stage == 2) {
      std::vector<PackedSequence> cross, text;
      if (!c.paths.cross.empty()) cross = LoadPacked(c.paths.cross, vocab);
      if (!c.paths.text.empty()) text = LoadPacked(c.paths.text, vocab);
      auto r = RunStage2(std::move(base), std::move(cross), std::move(text), cfg, out,
                         c.stage(2).cross_weight, c.stage(2).text_weight);
      report = std::move(r.report);
    } else {
      auto chain = LoadPacked(Need(c.paths.chain, "--chain"), vocab);
      auto r = RunStage3(base, std::move(chain), cfg, out);
      report = std::move(r.report);
    }
  }
  if (!c.paths.report.empty()) WriteReportJsonl(c.paths.report, report);
  ordered_json doc{{"stage", stage},
                   {"checkpoint", out.string()},
                   {"steps", report.steps.size()},
                   {"first_loss", report.steps.front().loss},
                   {"final_loss", report.steps.back().loss},
                   {"trainable_parameters", report.trainable_parameters},
                   {"dropped", report.dropped},
                   {"wall_seconds", report.wall_seconds},
                   {"sha256", FileSha256(out)}};
  if (stage == 3) {
    doc["base_hash_before"] = report.base_hash_before;
    doc["base_hash_after"] = report.base_hash_after;
  }
  Emit(doc);
}

struct InferInputs {
  std::string text;
  std::string units;
  std::string format = "ti-tr";
  bool greedy = false;
};

SamplingConfig SamplingFor(const GlobalConfig& c, bool greedy) {
  SamplingConfig s = c.sampling;
  s.seed = c.seed;
  if (greedy) {
    s.top_k = 1;
    s.top_p = 1.0;
  }
  return s;
}

void InferCmd(GlobalConfig& c, const InferInputs& in) {
  const Model model = LoadCheckpoint(Need(c.paths.model, "--model"));
  std::optional<Lora> adapters;
  if (!c.paths.adapters.empty()) adapters = LoadAdapters(c.paths.adapters, model.config());
  const ChainFormat format = ParseChainFormat(in.format);
  if (!in.text.empty() && !in.units.empty()) {
    Fail(ErrorKind::kInvalidArgument, "give either --text or --units, not both");
  }
  ChainInstruction instruction;
  if (!in.units.empty()) {
    instruction = ParseUnitList(in.units);
  } else {
    instruction = in.text;
  }
  std::optional<Codebook> cb;
  if (!c.paths.codebook.empty()) cb = Codebook::Load(c.paths.codebook);
  const auto r = Respond(model, adapters ? &*adapters : nullptr, instruction, format,
                         SamplingFor(c, in.greedy), cb ? &*cb : nullptr, c.synth);
  const std::string doc = ChainResponseJson(r.response, format);
  if (!c.paths.out.empty()) {
    std::ofstream(c.paths.out) << doc << "\n";
  }
  if (r.audio && !c.paths.audio_out.empty()) SaveWav(c.paths.audio_out, *r.audio);
  auto out = ordered_json::parse(doc);
  out["audio"] = r.audio && !c.paths.audio_out.empty() ? ordered_json(c.paths.audio_out)
                                                      : ordered_json(nullptr);
  Emit(out);
}

void SynthCmd(GlobalConfig& c, const std::string& units) {
  const Codebook cb = Codebook::Load(Need(c.paths.codebook, "--codebook"));
  UnitSequence seq;
  if (!units.empty()) {
    seq = ParseUnitList(units);
  } else {
    std::ifstream in(Need(c.paths.response, "--units or --response"));
    if (!in) Fail(ErrorKind::kIo, "cannot open response: " + c.paths.response);
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.contains("unit_response") || !doc["unit_response"].is_array()) {
      Fail(ErrorKind::kData, "response has no unit_response: " + c.paths.response);
    }
    seq.units = doc["unit_response"].get<std::vector<int>>();
  }
  seq = Deduplicate(seq);
  ValidateUnits(seq, cb.k());
  if (seq.units.empty()) Fail(ErrorKind::kData, "no units to synthesize");
  const Waveform w = Synthesize(seq, cb, c.synth);
  SaveWav(Need(c.paths.out, "--out"), w);
  Emit({{"audio", c.paths.out},
        {"samples", w.samples.size()},
        {"seconds", double(w.samples.size()) / w.sample_rate},
        {"sha256", FileSha256(c.paths.out)}});
}

void EvalFormatCmd(GlobalConfig& c, bool greedy) {
  const Model model = LoadCheckpoint(Need(c.paths.model, "--model"));
  std::optional<Lora> adapters;
  if (!c.paths.adapters.empty()) adapters = LoadAdapters(c.paths.adapters, model.config());
  const auto prompts = LoadChain(Need(c.paths.prompts, "--prompts"), UnitCount(model));
  if (prompts.empty()) Fail(ErrorKind::kData, "empty prompt file");
  std::size_t ok = 0;
  ordered_json per_format = ordered_json::object();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& p = prompts[i];
    ChainInstruction in = SpeechInput(p.format) ? ChainInstruction(p.quad.speech_instruction)
                                                : ChainInstruction(p.quad.text_instruction);
    SamplingConfig s = SamplingFor(c, greedy);
    s.seed = Rng::Derive(c.seed, i);
    const auto r = Respond(model, adapters ? &*adapters : nullptr, in, p.format, s, nullptr);
    const std::string name(ChainFormatName(p.format));
    auto& slot = per_format[name];
    if (slot.is_null()) slot = {{"total", 0}, {"well_formed", 0}};
    slot["total"] = slot["total"].get<int>() + 1;
    if (r.response.well_formed) {
      ++ok;
      slot["well_formed"] = slot["well_formed"].get<int>() + 1;
    }
  }
  Emit({{"total", prompts.size()},
        {"well_formed", ok},
        {"rate", double(ok) / double(prompts.size())},
        {"per_format", per_format}});
}

// ---- dispatch --------------------------------------------------------------

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return 1;
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kData:
      return 2;
    case ErrorKind::kInternal:
      break;
  }
  return 3;
}

const char* KindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return "usage";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kFormat:
      return "format";
    case ErrorKind::kData:
      return "data";
    case ErrorKind::kInternal:
      break;
  }
  return "internal";
}

int ReportError(int code, const std::string& kind, const std::string& message) {
  std::cerr << ordered_json{{"error", kind}, {"exit_code", code}, {"message", message}}.dump()
            << std::endl;
  return code;
}

// The config file is read before flags are declared so flag defaults come
// from it and explicit flags override it.
std::string FindConfigPath(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.starts_with("--config=")) return std::string(a.substr(9));
  }
  return "";
}

int Run(int argc, char** argv) {
  const std::string config_path = FindConfigPath(argc, argv);
  GlobalConfig c = config_path.empty() ? GlobalConfig() : GlobalConfig::Load(config_path);

  CLI::App app{"Discrete speech unit language model toolkit", "unitlm"};
  app.set_version_flag("--version", UNITLM_VERSION);
  app.require_subcommand(1);
  std::string config_flag = config_path;

  auto common = [&](CLI::App* s) {
    s->set_version_flag("--version", UNITLM_VERSION);
    s->add_option("--config", config_flag, "JSON config file (flags override it)");
    s->add_option("--seed", c.seed, "global seed [seed]")->capture_default_str();
    s->add_option("--workers", c.workers, "kernel worker threads [workers]")
        ->capture_default_str();
  };
  auto features = [&](CLI::App* s) {
    s->add_option("--sample-rate", c.features.sample_rate, "[features.sample_rate]");
    s->add_option("--frame-length-ms", c.features.frame_length_ms, "[features.frame_length_ms]");
    s->add_option("--frame-shift-ms", c.features.frame_shift_ms, "[features.frame_shift_ms]");
    s->add_option("--mel-bins", c.features.num_mel_bins, "[features.num_mel_bins]");
    s->add_option("--low-freq", c.features.low_freq, "[features.low_freq]");
    s->add_option("--high-freq", c.features.high_freq, "[features.high_freq]");
    s->add_option("--log-floor", c.features.log_floor, "[features.log_floor]");
  };
  auto sampling = [&](CLI::App* s, bool& greedy) {
    s->add_option("--temperature", c.sampling.temperature, "[sampling.temperature]")
        ->capture_default_str();
    s->add_option("--top-k", c.sampling.top_k, "[sampling.top_k]")->capture_default_str();
    s->add_option("--top-p", c.sampling.top_p, "[sampling.top_p]")->capture_default_str();
    s->add_option("--max-new-tokens", c.sampling.max_new_tokens, "[sampling.max_new_tokens]")
        ->capture_default_str();
    s->add_flag("--greedy", greedy, "top-k 1 decoding");
  };
  auto path = [&](CLI::App* s, const char* flag, std::string& field, const char* key,
                  const char* help) {
    s->add_option(flag, field, std::string(help) + " [paths." + key + "]");
  };

  auto* codebook = app.add_subcommand("train-codebook", "k-means codebook over manifest audio");
  common(codebook);
  features(codebook);
  path(codebook, "--manifest", c.paths.manifest, "manifest", "TSV of audio path and transcript");
  path(codebook, "--out", c.paths.out, "out", "codebook output file");
  codebook->add_option("--k", c.k, "number of units [codebook.k]")->capture_default_str();
  codebook->add_option("--max-iters", c.kmeans_iters, "Lloyd iterations [codebook.max_iters]")
      ->capture_default_str();

  auto* extract = app.add_subcommand("extract-units", "quantize manifest audio to reduced units");
  common(extract);
  features(extract);
  path(extract, "--manifest", c.paths.manifest, "manifest", "TSV of audio path and transcript");
  path(extract, "--codebook", c.paths.codebook, "codebook", "codebook file");
  path(extract, "--out", c.paths.out, "out", "unit file output");

  auto* t2u = app.add_subcommand("train-t2u", "train the text-to-unit generator");
  common(t2u);
  path(t2u, "--manifest", c.paths.manifest, "manifest", "TSV of audio path and transcript");
  path(t2u, "--units", c.paths.units, "units", "unit file aligned with the manifest");
  path(t2u, "--out", c.paths.out, "out", "generator checkpoint output");
  path(t2u, "--report", c.paths.report, "report", "JSON-lines loss report");
  t2u->add_option("--steps", c.t2u.train.steps, "[t2u.steps]")->capture_default_str();
  t2u->add_option("--lr", c.t2u.train.peak_lr, "[t2u.peak_lr]")->capture_default_str();
  t2u->add_option("--batch-size", c.t2u.train.batch_size, "[t2u.batch_size]")
      ->capture_default_str();
  t2u->add_option("--warmup", c.t2u.train.warmup_steps, "[t2u.warmup_steps]")
      ->capture_default_str();
  t2u->add_option("--layers", c.t2u.model.layers, "[t2u.layers]")->capture_default_str();
  t2u->add_option("--dim", c.t2u.model.dim, "[t2u.dim]")->capture_default_str();
  t2u->add_option("--heads", c.t2u.model.heads, "[t2u.heads]")->capture_default_str();
  t2u->add_option("--ffn-dim", c.t2u.model.ffn_dim, "[t2u.ffn_dim]")->capture_default_str();
  t2u->add_option("--max-len", c.t2u.model.max_len, "[t2u.max_len]")->capture_default_str();

  auto* dataset = app.add_subcommand("build-dataset", "cross-modal, text and chain datasets");
  common(dataset);
  path(dataset, "--manifest", c.paths.manifest, "manifest", "TSV of audio path and transcript");
  path(dataset, "--units", c.paths.units, "units", "unit file aligned with the manifest");
  path(dataset, "--out", c.paths.out, "out", "output directory");
  path(dataset, "--t2u", c.paths.t2u, "t2u", "text-to-unit generator; enables chain data");
  path(dataset, "--text-instructions", c.paths.text_instructions, "text_instructions",
       "TSV of instruction and response (bundled set if absent)");
  path(dataset, "--asr-pool", c.paths.asr_pool, "asr_pool", "ASR descriptions, one per line");
  path(dataset, "--tts-pool", c.paths.tts_pool, "tts_pool", "TTS descriptions, one per line");
  dataset->add_option("--p", c.p, "probability of ASR per record [dataset.p]")
      ->capture_default_str();
  dataset->add_option("--pack-max-len", c.pack_max_len, "[dataset.pack_max_len]")
      ->capture_default_str();
  dataset->add_option("--max-response-words", c.max_response_words,
                      "[dataset.max_response_words]")
      ->capture_default_str();
  dataset->add_option("--max-units", c.t2u_max_units, "[t2u.max_units]")->capture_default_str();

  int stage = 0;
  StageSection flags;  // per-stage flag values, copied into the chosen stage
  auto* train = app.add_subcommand("train", "run one training stage");
  common(train);
  train->add_option("--stage", stage, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
  path(train, "--units", c.paths.units, "units", "stage 1 unit file");
  path(train, "--init", c.paths.init, "init", "stage 2/3 starting checkpoint");
  path(train, "--cross", c.paths.cross, "cross", "stage 2 cross-modal packs");
  path(train, "--text", c.paths.text, "text", "stage 2 text-instruction packs");
  path(train, "--chain", c.paths.chain, "chain", "stage 3 chain packs");
  path(train, "--out", c.paths.out, "out", "checkpoint (stage 1/2) or adapters (stage 3)");
  path(train, "--report", c.paths.report, "report", "JSON-lines loss report");
  std::optional<int> steps, batch, max_len, warmup, save_every, rank, cross_w, text_w;
  std::optional<double> lr, clip, alpha;
  std::optional<std::uint64_t> stage_seed;
  train->add_option("--steps", steps, "[stageN.steps]");
  train->add_option("--batch-size", batch, "[stageN.batch_size]");
  train->add_option("--lr", lr, "[stageN.peak_lr]");
  train->add_option("--max-len", max_len, "[stageN.max_len]");
  train->add_option("--warmup", warmup, "[stageN.warmup_steps]");
  train->add_option("--save-every", save_every, "[stageN.save_every]");
  train->add_option("--clip-norm", clip, "[stageN.clip_norm]");
  train->add_option("--stage-seed", stage_seed, "[stageN.seed]");
  train->add_option("--lora-rank", rank, "[stage3.lora_rank]");
  train->add_option("--lora-alpha", alpha, "[stage3.lora_alpha]");
  train->add_option("--cross-weight", cross_w, "[stage2.cross_weight]");
  train->add_option("--text-weight", text_w, "[stage2.text_weight]");
  train->add_option("--layers", c.model.layers, "[model.layers]")->capture_default_str();
  train->add_option("--dim", c.model.dim, "[model.dim]")->capture_default_str();
  train->add_option("--heads", c.model.heads, "[model.heads]")->capture_default_str();
  train->add_option("--ffn-dim", c.model.ffn_dim, "[model.ffn_dim]")->capture_default_str();
  train->add_option("--model-max-len", c.model.max_len, "[model.max_len]")
      ->capture_default_str();
  (void)flags;

  InferInputs infer_in;
  auto* infer = app.add_subcommand("infer", "chain-of-modality response to one instruction");
  common(infer);
  sampling(infer, infer_in.greedy);
  path(infer, "--model", c.paths.model, "model", "model checkpoint");
  path(infer, "--adapters", c.paths.adapters, "adapters", "LoRA adapters");
  path(infer, "--codebook", c.paths.codebook, "codebook", "codebook for spoken answers");
  path(infer, "--out", c.paths.out, "out", "response JSON output");
  path(infer, "--audio-out", c.paths.audio_out, "audio_out", "WAV for a spoken answer");
  infer->add_option("--format", infer_in.format, "si-sr, si-tr, ti-sr or ti-tr")
      ->capture_default_str();
  infer->add_option("--text", infer_in.text, "text instruction");
  infer->add_option("--units", infer_in.units, "speech instruction as unit ids");
  infer->add_option("--repeat", c.synth.repeat, "[synth.repeat]")->capture_default_str();
  infer->add_option("--griffin-lim-iters", c.synth.griffin_lim_iters,
                    "[synth.griffin_lim_iters]")
      ->capture_default_str();

  std::string synth_units;
  auto* synth = app.add_subcommand("synth", "units to waveform");
  common(synth);
  path(synth, "--codebook", c.paths.codebook, "codebook", "codebook file");
  path(synth, "--response", c.paths.response, "response", "infer output JSON to voice");
  path(synth, "--out", c.paths.out, "out", "WAV output");
  synth->add_option("--units", synth_units, "unit ids");
  synth->add_option("--repeat", c.synth.repeat, "[synth.repeat]")->capture_default_str();
  synth->add_option("--griffin-lim-iters", c.synth.griffin_lim_iters,
                    "[synth.griffin_lim_iters]")
      ->capture_default_str();

  bool eval_greedy = false;
  auto* eval = app.add_subcommand("eval-format", "well-formed rate over a chain prompt file");
  common(eval);
  sampling(eval, eval_greedy);
  path(eval, "--model", c.paths.model, "model", "model checkpoint");
  path(eval, "--adapters", c.paths.adapters, "adapters", "LoRA adapters");
  path(eval, "--prompts", c.paths.prompts, "prompts", "chain JSON-lines records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e);
      return 0;
    }
    return ReportError(1, "usage", e.what());
  }

  if (stage != 0) {
    StageConfig& t = c.stage(stage).train;
    if (steps) t.steps = *steps;
    if (batch) t.batch_size = *batch;
    if (lr) t.peak_lr = *lr;
    if (max_len) t.max_len = *max_len;
    if (warmup) t.warmup_steps = *warmup;
    if (save_every) t.save_every = *save_every;
    if (clip) t.clip_norm = *clip;
    if (stage_seed) t.seed = *stage_seed, c.stage(stage).seed_set = true;
    if ((rank || alpha) && stage != 3) {
      Fail(ErrorKind::kInvalidArgument, "--lora-rank/--lora-alpha apply to stage 3 only");
    }
    if (rank) t.lora->rank = *rank;
    if (alpha) t.lora->alpha = *alpha;
    if (cross_w) c.stage(2).cross_weight = *cross_w;
    if (text_w) c.stage(2).text_weight = *text_w;
  }
  c.Validate();
  kernels::SetWorkerCount(c.workers);

  if (*codebook) TrainCodebookCmd(c);
  if (*extract) ExtractUnitsCmd(c);
  if (*t2u) TrainT2uCmd(c);
  if (*dataset) BuildDatasetCmd(c);
  if (*train) TrainCmd(c, stage);
  if (*infer) InferCmd(c, infer_in);
  if (*synth) SynthCmd(c, synth_units);
  if (*eval) EvalFormatCmd(c, eval_greedy);
  return 0;
}

}  // namespace
}  // namespace unitlm::cli

int main(int argc, char** argv) {
  using namespace unitlm::cli;
  try {
    return Run(argc, argv);
  } catch (const unitlm::Error& e) {
    return ReportError(ExitCodeFor(e.kind()), KindName(e.kind()), e.what());
  } catch (const std::exception& e) {
    return ReportError(3, "internal", e.what());
  }
}
