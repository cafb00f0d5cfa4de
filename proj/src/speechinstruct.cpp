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

#include "unitlm/speechinstruct.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "unitlm/error.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kSpeechGptMarker = "[SpeechGPT]: ";

std::vector<std::string> ReadLines(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, std::string("cannot open ") + what + ": " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool Blank(std::string_view s) {
  return s.find_first_not_of(" \t") == std::string_view::npos;
}

// Splits "a<TAB>b" into two non-empty fields or fails naming the line.
std::pair<std::string, std::string> SplitTsv(const std::string& line, std::size_t lineno,
                                             const std::filesystem::path& path) {
  const auto tab = line.find('\t');
  const std::string where = path.string() + ":" + std::to_string(lineno);
  if (tab == std::string::npos) Fail(ErrorKind::kData, "missing column at line " + where);
  std::string first = line.substr(0, tab);
  std::string second = line.substr(tab + 1);
  if (first.empty() || second.empty()) Fail(ErrorKind::kData, "empty column at line " + where);
  return {std::move(first), std::move(second)};
}

UnitSequence ReducedUnits(const json& arr, int k, const std::string& where) {
  UnitSequence seq;
  seq.units = arr.get<std::vector<int>>();
  seq.reduced = true;
  try {
    ValidateUnits(seq, k);
  } catch (const Error& e) {
    Fail(ErrorKind::kData, where + ": " + e.what());
  }
  return seq;
}

void WriteJsonLines(const std::filesystem::path& path, const std::vector<ordered_json>& docs) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& d : docs) out << d.dump() << "\n";
  if (!out) Fail(ErrorKind::kIo, "short write: " + path.string());
}

// Calls fn(doc, where) for each non-blank line; JSON errors become kFormat.
template <typename Fn>
void ReadJsonLines(const std::filesystem::path& path, const char* what, Fn&& fn) {
  const auto lines = ReadLines(path, what);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (Blank(lines[i])) continue;
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    json doc;
    try {
      doc = json::parse(lines[i]);
      fn(doc, where);
    } catch (const json::exception& e) {
      Fail(ErrorKind::kFormat, "bad " + std::string(what) + " record at " + where + ": " +
                                   e.what());
    }
  }
}

std::string RenderUnits(const UnitSequence& seq) {
  std::string out;
  for (int u : seq.units) out += Vocabulary::UnitText(u);
  return out;
}

}  // namespace

std::vector<ManifestRecord> LoadManifest(const std::filesystem::path& path) {
  const auto lines = ReadLines(path, "manifest");
  std::vector<ManifestRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (Blank(lines[i])) continue;
    auto [audio, text] = SplitTsv(lines[i], i + 1, path);
    records.push_back({std::move(audio), std::move(text)});
  }
  return records;
}

std::string_view TaskName(Task task) { return task == Task::kAsr ? "ASR" : "TTS"; }

Task ParseTask(std::string_view name) {
  if (name == "ASR") return Task::kAsr;
  if (name == "TTS") return Task::kTts;
  Fail(ErrorKind::kData, "unknown task: " + std::string(name));
}

DescriptionPools DescriptionPools::Bundled() {
  DescriptionPools pools;
  pools.asr = {
      "Begin by converting the spoken words into written text.",
      "Can you transcribe the speech into a written format?",
      "Focus on translating the audible content into text.",
      "Transcribe the speech by carefully listening to it.",
      "Would you kindly write down the content of the speech?",
      "Analyze the speech and create a written transcription.",
      "Engage with the speech to produce a text-based version.",
      "Can you document the speech in written form?",
      "Transform the spoken words into text accurately.",
      "How about putting the speech's content into writing?",
  };
  pools.tts = {
      "Can you please read this sentence out loud?",
      "Recite the following words as if you were speaking normally.",
      "Project your voice to clearly articulate this statement.",
      "Would you mind speaking these words as naturally as possible?",
      "Whisper the given sentence softly.",
      "Enunciate each word in this sentence with precision.",
      "How would you express this sentence in a conversational tone?",
      "Could you please relay the message below verbally?",
      "Emphasize the key points while reading the sentence.",
      "Sing the text provided in a melodic voice.",
  };
  return pools;
}

std::vector<std::string> DescriptionPools::LoadPool(const std::filesystem::path& path) {
  std::vector<std::string> pool;
  for (auto& line : ReadLines(path, "description pool")) {
    if (!Blank(line)) pool.push_back(std::move(line));
  }
  if (pool.empty()) Fail(ErrorKind::kData, "empty description pool: " + path.string());
  return pool;
}

InstructionText FormatCrossModal(const CrossModalSample& s) {
  const std::string units = RenderUnits(s.units);
  const bool asr = s.task == Task::kAsr;
  InstructionText t;
  t.prompt = "[Human]:" + s.description + ". This is input: " + (asr ? units : s.transcript) +
             "<eoh>.[SpeechGPT]: ";
  t.response = (asr ? s.transcript : units) + "<eos>.";
  return t;
}

std::vector<CrossModalSample> BuildCrossModal(std::span<const ManifestRecord> records,
                                              std::span<const UnitSequence> units,
                                              const DescriptionPools& pools, double p,
                                              std::uint64_t seed) {
  if (records.size() != units.size()) {
    Fail(ErrorKind::kData, "misaligned inputs: " + std::to_string(records.size()) +
                               " manifest records vs " + std::to_string(units.size()) +
                               " unit sequences");
  }
  if (!(p >= 0.0 && p <= 1.0)) Fail(ErrorKind::kInvalidArgument, "p must lie in [0,1]");
  if (pools.asr.empty() || pools.tts.empty()) {
    Fail(ErrorKind::kInvalidArgument, "description pools must be non-empty for both tasks");
  }
  Rng rng(seed);
  std::vector<CrossModalSample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].transcript.empty()) {
      Fail(ErrorKind::kData, "empty transcript for record " + std::to_string(i));
    }
    CrossModalSample s;
    s.task = rng.Uniform() < p ? Task::kAsr : Task::kTts;
    const auto& pool = s.task == Task::kAsr ? pools.asr : pools.tts;
    s.description = pool[rng.Below(pool.size())];
    s.units = units[i].reduced ? units[i] : Deduplicate(units[i]);
    s.transcript = records[i].transcript;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TextInstruction> BundledTextInstructions() {
  return {
      {"What is the capital of France?", "The capital of France is Paris."},
      {"Say hello to me.", "Hello, it is nice to meet you."},
      {"What color is the sky on a clear day?", "The sky is blue on a clear day."},
      {"How many days are in a week?", "There are seven days in a week."},
      {"Name a fruit that is yellow.", "A banana is a yellow fruit."},
      {"What do bees make?", "Bees make honey."},
      {"Give me a word that rhymes with cat.", "Hat rhymes with cat."},
      {"What is two plus three?", "Two plus three is five."},
      {"Which animal says moo?", "A cow says moo."},
      {"What season comes after winter?", "Spring comes after winter."},
      {"Tell me something about the moon.", "The moon orbits the earth once a month."},
      {"What do plants need to grow?", "Plants need water, light and soil to grow."},
      {"How do you greet someone in the morning?", "You can say good morning."},
      {"What is the opposite of hot?", "The opposite of hot is cold."},
      {"Recommend a healthy breakfast.", "Oatmeal with fresh fruit is a healthy breakfast."},
      {"What is frozen water called?", "Frozen water is called ice."},
      {"How many legs does a spider have?", "A spider has eight legs."},
      {"Where does the sun rise?", "The sun rises in the east."},
      {"What should I do if I feel tired?", "Try to rest and get a good night of sleep."},
      {"Name a musical instrument with strings.", "The guitar has strings."},
      {"What is the largest ocean?", "The Pacific is the largest ocean."},
      {"Spell the word dog.", "D, O, G."},
      {"What do you call a baby cat?", "A baby cat is called a kitten."},
      {"Thank you for your help.", "You are welcome, I am glad to help."},
  };
}

std::vector<TextInstruction> LoadTextInstructions(const std::filesystem::path& path) {
  const auto lines = ReadLines(path, "text instructions");
  std::vector<TextInstruction> items;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (Blank(lines[i])) continue;
    auto [inst, resp] = SplitTsv(lines[i], i + 1, path);
    items.push_back({std::move(inst), std::move(resp)});
  }
  return items;
}

InstructionText FormatTextInstruction(const TextInstruction& item) {
  return {"[Human]:" + item.instruction + "<eoh>.[SpeechGPT]: ", item.response + "<eos>."};
}

std::string_view ChainFormatName(ChainFormat format) {
  switch (format) {
    case ChainFormat::kSiSr: return "si-sr";
    case ChainFormat::kSiTr: return "si-tr";
    case ChainFormat::kTiSr: return "ti-sr";
    case ChainFormat::kTiTr: return "ti-tr";
  }
  Fail(ErrorKind::kInternal, "bad chain format");
}

ChainFormat ParseChainFormat(std::string_view name) {
  for (ChainFormat f : kAllChainFormats) {
    if (ChainFormatName(f) == name) return f;
  }
  Fail(ErrorKind::kInvalidArgument,
       "unknown chain format '" + std::string(name) + "' (expected si-sr|si-tr|ti-sr|ti-tr)");
}

bool SpeechInput(ChainFormat f) { return f == ChainFormat::kSiSr || f == ChainFormat::kSiTr; }
bool SpeechOutput(ChainFormat f) { return f == ChainFormat::kSiSr || f == ChainFormat::kTiSr; }

std::string ChainPromptText(ChainFormat format, std::string_view instruction) {
  const std::string in(instruction);
  switch (format) {
    case ChainFormat::kSiSr:
      return "[Human]: This is a speech instruction: " + in +
             ". And your response should be speech. You can do it step by step. You can "
             "first transcribe the instruction and get the text Instruction. Then you can "
             "think about the instruction and get the text response. Last, you should speak "
             "the response aloud <eoh>. [SpeechGPT]: ";
    case ChainFormat::kSiTr:
      return "[Human]: This is a speech instruction: " + in +
             ". And your response should be text. You can do it step by step. You can first "
             "transcribe the instruction and get the text instruction. Then you can think "
             "about the instruction and get the text response. <eoh>. [SpeechGPT]: ";
    case ChainFormat::kTiSr:
      return "[Human]: This is a text instruction: " + in +
             ". And your response should be speech. You can do it step by step. You can "
             "think about the instruction and get the text response. Then you should speak "
             "the response aloud <eoh>. [SpeechGPT]: ";
    case ChainFormat::kTiTr:
      return "[Human]: This is a text instruction: " + in +
             ". And your response should be text. You can think about the instruction and "
             "get the text response. [SpeechGPT]: ";
  }
  Fail(ErrorKind::kInternal, "bad chain format");
}

std::string ChainResponseText(const ChainQuadruplet& q, ChainFormat format) {
  std::string out;
  if (SpeechInput(format)) out += "[tq] " + q.text_instruction + "; ";
  out += "[ta] " + q.text_response;
  if (SpeechOutput(format)) out += "; [ua] " + RenderUnits(q.speech_response);
  out += "<eoa>";
  return out;
}

InstructionText FormatChain(const ChainQuadruplet& q, ChainFormat format) {
  if (q.text_instruction.empty() || q.text_response.empty()) {
    Fail(ErrorKind::kData, "chain quadruplet texts must be non-empty");
  }
  const std::string instruction =
      SpeechInput(format) ? RenderUnits(q.speech_instruction) : q.text_instruction;
  return {ChainPromptText(format, instruction), ChainResponseText(q, format) + "."};
}

std::vector<TextInstruction> FilterByResponseWords(std::span<const TextInstruction> items,
                                                   int max_words) {
  std::vector<TextInstruction> kept;
  for (const auto& item : items) {
    std::istringstream words(item.response);
    int count = 0;
    std::string w;
    while (words >> w) ++count;
    if (count <= max_words) kept.push_back(item);
  }
  return kept;
}

TokenizedSample Tokenize(const InstructionText& text, const Vocabulary& vocab) {
  Require(text.prompt.ends_with(kSpeechGptMarker), "instruction prompt must end with marker");
  TokenizedSample s;
  s.ids = vocab.Encode(text.prompt);
  s.prefix_len = int(s.ids.size());
  const auto response = vocab.Encode(text.response);
  if (response.empty()) Fail(ErrorKind::kData, "empty target: instruction has no response");
  s.ids.insert(s.ids.end(), response.begin(), response.end());
  return s;
}

PackResult PackMultiturn(std::span<const TokenizedSample> samples, int max_len,
                         std::uint64_t seed) {
  if (max_len < 1) Fail(ErrorKind::kInvalidArgument, "max_len must be positive");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(order);

  PackResult result;
  PackedSequence open;
  for (std::size_t idx : order) {
    const auto& s = samples[idx];
    const int len = int(s.ids.size());
    Require(s.prefix_len >= 0 && s.prefix_len < len, "sample prefix must leave a target");
    if (len > max_len) {
      ++result.dropped;
      continue;
    }
    if (int(open.token_ids.size()) + len > max_len) {
      result.packs.push_back(std::move(open));
      open = PackedSequence{};
    }
    const int start = int(open.token_ids.size());
    open.token_ids.insert(open.token_ids.end(), s.ids.begin(), s.ids.end());
    open.segments.push_back({start, s.prefix_len, start + len});
  }
  if (!open.token_ids.empty()) result.packs.push_back(std::move(open));
  return result;
}

void SaveCrossModal(const std::filesystem::path& path,
                    std::span<const CrossModalSample> samples) {
  std::vector<ordered_json> docs;
  for (const auto& s : samples) {
    ordered_json d;
    d["task"] = TaskName(s.task);
    d["description"] = s.description;
    d["units"] = s.units.units;
    d["transcript"] = s.transcript;
    docs.push_back(std::move(d));
  }
  WriteJsonLines(path, docs);
}

std::vector<CrossModalSample> LoadCrossModal(const std::filesystem::path& path, int k) {
  std::vector<CrossModalSample> out;
  ReadJsonLines(path, "cross-modal", [&](const json& d, const std::string& where) {
    CrossModalSample s;
    s.task = ParseTask(d.at("task").get<std::string>());
    s.description = d.at("description").get<std::string>();
    s.units = ReducedUnits(d.at("units"), k, where);
    s.transcript = d.at("transcript").get<std::string>();
    if (s.transcript.empty()) Fail(ErrorKind::kData, "empty transcript at " + where);
    out.push_back(std::move(s));
  });
  return out;
}

void SaveChain(const std::filesystem::path& path, std::span<const ChainRecord> records) {
  std::vector<ordered_json> docs;
  for (const auto& r : records) {
    ordered_json d;
    d["format"] = ChainFormatName(r.format);
    d["text_instruction"] = r.quad.text_instruction;
    d["text_response"] = r.quad.text_response;
    d["speech_instruction"] = r.quad.speech_instruction.units;
    d["speech_response"] = r.quad.speech_response.units;
    docs.push_back(std::move(d));
  }
  WriteJsonLines(path, docs);
}

std::vector<ChainRecord> LoadChain(const std::filesystem::path& path, int k) {
  std::vector<ChainRecord> out;
  ReadJsonLines(path, "chain", [&](const json& d, const std::string& where) {
    ChainRecord r;
    r.format = ParseChainFormat(d.at("format").get<std::string>());
    r.quad.text_instruction = d.at("text_instruction").get<std::string>();
    r.quad.text_response = d.at("text_response").get<std::string>();
    r.quad.speech_instruction = ReducedUnits(d.at("speech_instruction"), k, where);
    r.quad.speech_response = ReducedUnits(d.at("speech_response"), k, where);
    if (r.quad.text_instruction.empty() || r.quad.text_response.empty()) {
      Fail(ErrorKind::kData, "empty chain text at " + where);
    }
    out.push_back(std::move(r));
  });
  return out;
}

void SavePacked(const std::filesystem::path& path, std::span<const PackedSequence> packs) {
  std::vector<ordered_json> docs;
  for (const auto& p : packs) {
    ordered_json d;
    d["token_ids"] = p.token_ids;
    auto& segs = d["segments"] = ordered_json::array();
    for (const auto& s : p.segments) segs.push_back({s.start, s.prefix_len, s.end});
    docs.push_back(std::move(d));
  }
  WriteJsonLines(path, docs);
}

std::vector<PackedSequence> LoadPacked(const std::filesystem::path& path, int vocab_size) {
  std::vector<PackedSequence> out;
  ReadJsonLines(path, "packed", [&](const json& d, const std::string& where) {
    PackedSequence p;
    p.token_ids = d.at("token_ids").get<std::vector<TokenId>>();
    for (const auto& s : d.at("segments")) {
      const auto v = s.get<std::vector<int>>();
      if (v.size() != 3) Fail(ErrorKind::kData, "malformed packs: segment arity at " + where);
      p.segments.push_back({v[0], v[1], v[2]});
    }
    for (TokenId id : p.token_ids) {
      if (id < 0 || id >= vocab_size) {
        Fail(ErrorKind::kData, "malformed packs: token id out of range at " + where);
      }
    }
    try {
      ValidateSegments(p.segments, int(p.token_ids.size()));
    } catch (const Error& e) {
      Fail(ErrorKind::kData, "malformed packs at " + where + ": " + e.what());
    }
    out.push_back(std::move(p));
  });
  return out;
}

}  // namespace unitlm
