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

// Discrete speech units: k-means codebook training, nearest-centroid
// quantization, run-length reduction and a centroid-spectrum vocoder.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "unitlm/audio.hpp"

namespace unitlm {

struct UnitSequence {
  std::vector<int> units;
  bool reduced = false;

  bool operator==(const UnitSequence&) const = default;
};

// Throws unless every unit is in [0, k) and, when `reduced` is set, no two
// adjacent units are equal.
void ValidateUnits(const UnitSequence& seq, int k);

class Codebook {
 public:
  Codebook() = default;
  // Validates K >= 2, finite entries and pairwise-distinct centroids.
  Codebook(std::vector<float> centroids, int k, int dim);

  int k() const { return k_; }
  int dim() const { return dim_; }
  std::span<const float> centroids() const { return centroids_; }
  std::span<const float> Centroid(int i) const {
    return {centroids_.data() + std::size_t(i) * dim_, std::size_t(dim_)};
  }

  // Binary format: "UFCB", u32 version, u32 K, u32 dim, K*dim f32 (LE).
  void Save(const std::filesystem::path& path) const;
  static Codebook Load(const std::filesystem::path& path);

 private:
  std::vector<float> centroids_;
  int k_ = 0;
  int dim_ = 0;
};

struct KMeansOptions {
  int k = 100;
  std::uint64_t seed = 0;
  int max_iters = 50;
};

struct KMeansResult {
  Codebook codebook;
  // inertia[0] is measured right after k-means++ seeding; one entry per
  // completed Lloyd iteration follows.
  std::vector<double> inertia;
  int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations. Stops after max_iters or
// when an assignment pass changes nothing. Empty clusters are re-seeded from
// the point farthest from its own centroid. Bit-deterministic for a fixed
// seed regardless of worker count.
KMeansResult TrainCodebook(std::span<const FeatureFrames> frames,
                           const KMeansOptions& opts);

// Nearest centroid per frame, ties to the lowest index.
UnitSequence Quantize(const FeatureFrames& frames, const Codebook& cb);

// Collapses every run of equal adjacent units to one occurrence.
UnitSequence Deduplicate(const UnitSequence& seq);

struct SynthConfig {
  int repeat = 2;  // mel frames emitted per reduced unit
  int griffin_lim_iters = 32;
  FeatureConfig features;
};

// Mel frames [units*repeat x dim] obtained by centroid lookup; the first
// stage of Synthesize, exposed for inspection.
FeatureFrames UnitsToMel(const UnitSequence& seq, const Codebook& cb,
                         const SynthConfig& cfg);

// Centroid lookup, mel pseudo-inverse to linear magnitude, then Griffin-Lim
// with zero initial phase. Deterministic.
Waveform Synthesize(const UnitSequence& seq, const Codebook& cb,
                    const SynthConfig& cfg);

// Unit files: header "#K=<K> reduced=<true|false>", then one utterance per
// line as space-separated decimal integers.
struct UnitFile {
  int k = 0;
  bool reduced = false;
  std::vector<UnitSequence> utterances;
};

void SaveUnitFile(const std::filesystem::path& path, const UnitFile& file);
UnitFile LoadUnitFile(const std::filesystem::path& path);

}  // namespace unitlm
