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

// Shared fixtures for unit and acceptance tests.

#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "unitlm/audio.hpp"
#include "unitlm/rng.hpp"
#include "unitlm/speechinstruct.hpp"
#include "unitlm/transformer.hpp"
#include "unitlm/units.hpp"

namespace unitlm::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("unitlm_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline UnitSequence RandomReduced(Rng& rng, int length, int k) {
  UnitSequence seq;
  seq.reduced = true;
  for (int i = 0; i < length; ++i) {
    int u = int(rng.Below(std::uint64_t(k)));
    if (!seq.units.empty() && u == seq.units.back()) u = (u + 1) % k;
    seq.units.push_back(u);
  }
  return seq;
}

// Sum of sinusoids at 16 kHz with a slow amplitude envelope.
inline Waveform Tone(std::initializer_list<double> freqs, double seconds, double amp = 0.3) {
  Waveform w;
  w.sample_rate = 16000;
  const int n = int(seconds * w.sample_rate);
  w.samples.resize(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / w.sample_rate;
    double v = 0.0;
    for (double f : freqs) v += std::sin(2.0 * std::numbers::pi * f * t);
    w.samples[std::size_t(i)] = float(amp * v / double(freqs.size()));
  }
  return w;
}

inline ModelConfig TinyConfig(int k, int dim = 64, int layers = 2, int max_len = 512) {
  return ModelConfig{.layers = layers,
                     .dim = dim,
                     .heads = 4,
                     .ffn_dim = 4 * dim,
                     .max_len = max_len,
                     .vocab_size = 264 + k};
}

}  // namespace unitlm::testing
