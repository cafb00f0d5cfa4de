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

// Checkpoint framing shared by model and adapter files:
//
//   "UFLM"  u32 version  u32 kind (0 = model, 1 = adapters)
//   u32 layers, dim, heads, ffn_dim, max_len, vocab_size
//   u32 tensor_count
//   per tensor: u32 name_len, name bytes (UTF-8), u32 ndim, u32 dims[ndim],
//               little-endian f32 data
//
// Adapter files carry the LoRA rank and alpha as a 1x2 tensor "lora.meta".

#pragma once

#include <filesystem>
#include <string>

#include "unitlm/transformer.hpp"

namespace unitlm {

void SaveCheckpoint(const std::filesystem::path& path, const Model& model);
Model LoadCheckpoint(const std::filesystem::path& path);

void SaveAdapters(const std::filesystem::path& path, const ModelConfig& cfg,
                  const Lora& lora);
// Throws when the adapter file was written for a different model shape.
Lora LoadAdapters(const std::filesystem::path& path, const ModelConfig& cfg);

// Lower-case hex SHA-256 of a file's bytes.
std::string FileSha256(const std::filesystem::path& path);

// SHA-256 over the checkpoint serialization of the model's parameters.
std::string ParameterSha256(const Model& model);

}  // namespace unitlm
