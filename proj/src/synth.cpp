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

// Unit vocoder: centroid log-mel lookup, filterbank pseudo-inverse and
// Griffin-Lim phase reconstruction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

#include "unitlm/error.hpp"
#include "unitlm/units.hpp"

namespace unitlm {

FeatureFrames UnitsToMel(const UnitSequence& seq, const Codebook& cb,
                         const SynthConfig& cfg) {
  Require(cfg.repeat >= 1, "repeat must be at least 1");
  for (int u : seq.units) {
    if (u < 0 || u >= cb.k()) {
      Fail(ErrorKind::kData, "unit out of range: " + std::to_string(u));
    }
  }
  FeatureFrames mel;
  mel.feature_dim = cb.dim();
  mel.num_frames = int(seq.units.size()) * cfg.repeat;
  mel.frame_shift_ms = cfg.features.frame_shift_ms;
  mel.values.reserve(static_cast<std::size_t>(mel.num_frames) * cb.dim());
  for (int u : seq.units) {
    const auto centroid = cb.Centroid(u);
    for (int r = 0; r < cfg.repeat; ++r) {
      mel.values.insert(mel.values.end(), centroid.begin(), centroid.end());
    }
  }
  return mel;
}

Waveform Synthesize(const UnitSequence& seq, const Codebook& cb,
                    const SynthConfig& cfg) {
  const FeatureFrames mel = UnitsToMel(seq, cb, cfg);
  Waveform wave;
  wave.sample_rate = cfg.features.sample_rate;
  if (mel.num_frames == 0) return wave;
  if (cfg.features.num_mel_bins != cb.dim()) {
    Fail(ErrorKind::kData, "codebook dimension does not match mel bin count");
  }

  const Stft stft(cfg.features);
  const int bins = stft.num_bins();
  const int mels = cb.dim();
  const int frames = mel.num_frames;

  const auto filters = MelFilterbank(cfg.features);
  const Eigen::MatrixXd fb =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>(filters.data(), mels, bins);
  const Eigen::MatrixXd pinv =
      fb.completeOrthogonalDecomposition().pseudoInverse();  // bins x mels

  Eigen::MatrixXd linear_mel(mels, frames);
  for (int f = 0; f < frames; ++f) {
    for (int m = 0; m < mels; ++m) {
      const double v = std::exp(double(mel.values[std::size_t(f) * mels + m])) -
                       cfg.features.log_floor;
      linear_mel(m, f) = std::max(v, 0.0);
    }
  }
  const Eigen::MatrixXd magnitude = (pinv * linear_mel).cwiseMax(0.0);

  std::vector<std::complex<double>> spectra(static_cast<std::size_t>(frames) * bins);
  for (int f = 0; f < frames; ++f) {
    for (int b = 0; b < bins; ++b) {
      spectra[std::size_t(f) * bins + b] = {magnitude(b, f), 0.0};
    }
  }
  std::vector<double> signal = stft.Inverse(spectra, frames);
  for (int iter = 0; iter < cfg.griffin_lim_iters; ++iter) {
    const auto estimate = stft.Forward(signal);
    for (int f = 0; f < frames; ++f) {
      for (int b = 0; b < bins; ++b) {
        const std::complex<double> z = estimate[std::size_t(f) * bins + b];
        const double r = std::abs(z);
        const std::complex<double> phase = r > 1e-12 ? z / r : 1.0;
        spectra[std::size_t(f) * bins + b] = magnitude(b, f) * phase;
      }
    }
    signal = stft.Inverse(spectra, frames);
  }

  wave.samples.resize(signal.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    wave.samples[i] = float(std::clamp(signal[i], -1.0, 1.0));
  }
  return wave;
}

}  // namespace unitlm
