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

#include "unitlm/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "unitlm/error.hpp"

namespace unitlm {
namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindModel = 0;
constexpr std::uint32_t kKindAdapters = 1;

class Writer {
 public:
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(char((v >> (8 * i)) & 0xff));
  }
  void F32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    U32(bits);
  }
  void Bytes(const std::string& s) { buf_ += s; }
  void Tensor(const unitlm::Tensor<float>& t) {
    U32(std::uint32_t(t.name.size()));
    Bytes(t.name);
    U32(2);
    U32(std::uint32_t(t.rows));
    U32(std::uint32_t(t.cols));
    for (float v : t.data) F32(v);
  }
  void Header(std::uint32_t kind, const ModelConfig& cfg, std::uint32_t tensors) {
    Bytes("UFLM");
    U32(kVersion);
    U32(kind);
    for (int v : {cfg.layers, cfg.dim, cfg.heads, cfg.ffn_dim, cfg.max_len,
                  cfg.vocab_size}) {
      U32(std::uint32_t(v));
    }
    U32(tensors);
  }
  const std::string& str() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string source)
      : buf_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t U32() {
    Need(4);
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
    pos_ += 4;
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
           std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
  }
  float F32() {
    const std::uint32_t bits = U32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  unitlm::Tensor<float> Tensor() {
    const std::uint32_t name_len = U32();
    if (name_len > 4096) Bad("implausible tensor name length");
    std::string name = Bytes(name_len);
    if (U32() != 2) Bad("tensor " + name + " is not 2-D");
    const std::uint32_t rows = U32();
    const std::uint32_t cols = U32();
    if (std::uint64_t(rows) * cols * 4 > buf_.size()) Bad("tensor larger than file");
    unitlm::Tensor<float> t(std::move(name), int(rows), int(cols));
    for (float& v : t.data) v = F32();
    return t;
  }
  // Returns the kind.
  std::uint32_t Header(ModelConfig& cfg, std::uint32_t& tensors) {
    if (Bytes(4) != "UFLM") Bad("bad checkpoint magic");
    const std::uint32_t version = U32();
    if (version != kVersion) Bad("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t kind = U32();
    for (int* v : {&cfg.layers, &cfg.dim, &cfg.heads, &cfg.ffn_dim, &cfg.max_len,
                   &cfg.vocab_size}) {
      *v = int(U32());
    }
    tensors = U32();
    return kind;
  }
  bool done() const { return pos_ == buf_.size(); }
  [[noreturn]] void Bad(const std::string& what) const {
    Fail(ErrorKind::kFormat, what + ": " + source_);
  }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > buf_.size()) Bad("truncated checkpoint");
  }
  std::string buf_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string ReadFile(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, std::string("cannot open ") + what + ": " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFile(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write: " + path.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "short write: " + path.string());
}

std::string SerializeModel(const Model& model) {
  Writer w;
  std::uint32_t count = 0;
  model.params().ForEach([&](const Tensor<float>&) { ++count; });
  w.Header(kKindModel, model.config(), count);
  model.params().ForEach([&](const Tensor<float>& t) { w.Tensor(t); });
  return w.str();
}

std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    Fail(ErrorKind::kInternal, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

// Fills `params` from tensors matched by name; every slot must be present.
template <typename Params>
void FillByName(Reader& r, std::uint32_t count, Params& params) {
  std::map<std::string, Tensor<float>> by_name;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto t = r.Tensor();
    std::string name = t.name;
    by_name.emplace(std::move(name), std::move(t));
  }
  params.ForEach([&](Tensor<float>& slot) {
    auto it = by_name.find(slot.name);
    if (it == by_name.end()) r.Bad("missing tensor " + slot.name);
    if (it->second.rows != slot.rows || it->second.cols != slot.cols) {
      r.Bad("shape mismatch for tensor " + slot.name);
    }
    slot.data = std::move(it->second.data);
    by_name.erase(it);
  });
  by_name.erase("lora.meta");
  if (!by_name.empty()) r.Bad("unexpected tensor " + by_name.begin()->first);
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const Model& model) {
  WriteFile(path, SerializeModel(model));
}

Model LoadCheckpoint(const std::filesystem::path& path) {
  Reader r(ReadFile(path, "checkpoint"), path.string());
  ModelConfig cfg;
  std::uint32_t count = 0;
  if (r.Header(cfg, count) != kKindModel) r.Bad("not a model checkpoint");
  try {
    cfg.Validate();
  } catch (const Error& e) {
    r.Bad(e.what());
  }
  auto params = ModelParams<float>::Zeros(cfg);
  FillByName(r, count, params);
  if (!r.done()) r.Bad("trailing bytes");
  return Model(cfg, std::move(params));
}

void SaveAdapters(const std::filesystem::path& path, const ModelConfig& cfg,
                  const Lora& lora) {
  Writer w;
  std::uint32_t count = 1;
  lora.ForEach([&](const Tensor<float>&) { ++count; });
  w.Header(kKindAdapters, cfg, count);
  Tensor<float> meta("lora.meta", 1, 2);
  meta.data = {float(lora.rank), float(lora.alpha)};
  w.Tensor(meta);
  lora.ForEach([&](const Tensor<float>& t) { w.Tensor(t); });
  WriteFile(path, w.str());
}

Lora LoadAdapters(const std::filesystem::path& path, const ModelConfig& cfg) {
  Reader r(ReadFile(path, "adapters"), path.string());
  ModelConfig file_cfg;
  std::uint32_t count = 0;
  if (r.Header(file_cfg, count) != kKindAdapters) r.Bad("not an adapter file");
  if (!(file_cfg == cfg)) r.Bad("adapters were trained for a different model shape");
  if (count < 1) r.Bad("adapter file has no tensors");
  const Tensor<float> meta = r.Tensor();
  if (meta.name != "lora.meta" || meta.size() != 2) r.Bad("missing lora.meta");
  const int rank = int(meta.data[0]);
  if (rank < 1 || float(rank) != meta.data[0] || !(meta.data[1] > 0)) {
    r.Bad("bad adapter rank/alpha");
  }
  Lora lora = Lora::Zeros(cfg, rank, double(meta.data[1]));
  FillByName(r, count - 1, lora);
  if (!r.done()) r.Bad("trailing bytes");
  return lora;
}

std::string FileSha256(const std::filesystem::path& path) {
  return Sha256Hex(ReadFile(path, "file"));
}

std::string ParameterSha256(const Model& model) {
  return Sha256Hex(SerializeModel(model));
}

}  // namespace unitlm
