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

// PCM audio I/O and the log-mel front end that feeds the unit quantizer.

#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

namespace unitlm {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 16000;

  bool empty() const { return samples.empty(); }
};

// Reads a RIFF/WAVE file holding 16-bit little-endian mono PCM. Samples are
// scaled by 1/32768. Throws Error(kIo) when the file cannot be opened and
// Error(kFormat) for truncated headers, non-PCM data or channel counts != 1.
Waveform LoadWav(const std::filesystem::path& path);

// Writes 16-bit mono PCM; samples are clamped to [-1, 1] and rounded.
void SaveWav(const std::filesystem::path& path, const Waveform& wave);

struct FeatureConfig {
  int sample_rate = 16000;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 20.0;
  int num_mel_bins = 40;
  double low_freq = 0.0;
  double high_freq = 0.0;  // <= 0 means Nyquist
  double log_floor = 1e-6;

  int FrameLength() const;  // samples
  int FrameShift() const;   // samples
  int FftSize() const;      // next power of two >= FrameLength()
  int NumBins() const { return FftSize() / 2 + 1; }
  double HighFreq() const;
};

// Log-mel frames, row-major [num_frames x feature_dim].
struct FeatureFrames {
  std::vector<float> values;
  int num_frames = 0;
  int feature_dim = 0;
  double frame_shift_ms = 0.0;

  std::span<const float> Row(int i) const {
    return {values.data() + std::size_t(i) * feature_dim,
            std::size_t(feature_dim)};
  }
};

// HTK-style mel scale.
double HzToMel(double hz);
double MelToHz(double mel);

// Triangular filters spaced uniformly on the mel scale, evaluated at the FFT
// bin frequencies. Row-major [num_mel_bins x NumBins()].
std::vector<double> MelFilterbank(const FeatureConfig& cfg);

// Periodic Hann window of the configured frame length.
std::vector<double> HannWindow(int length);

// Short-time Fourier transform with the frame geometry of a FeatureConfig.
// Frames start at multiples of the hop and are never padded at the edges.
class Stft {
 public:
  explicit Stft(const FeatureConfig& cfg);

  int NumFrames(std::size_t num_samples) const;

  // Complex spectra, [num_frames x NumBins()].
  std::vector<std::complex<double>> Forward(std::span<const double> signal) const;

  // Windowed overlap-add inverse normalized by the summed squared window.
  // Output length is (num_frames - 1) * hop + frame_length.
  std::vector<double> Inverse(std::span<const std::complex<double>> spectra,
                              int num_frames) const;

  int frame_length() const { return frame_length_; }
  int hop() const { return hop_; }
  int fft_size() const { return fft_size_; }
  int num_bins() const { return fft_size_ / 2 + 1; }

 private:
  int frame_length_;
  int hop_;
  int fft_size_;
  std::vector<double> window_;
};

// Framewise log(mel(|STFT|) + floor). Deterministic and thread-safe.
// Rejects sample rates other than cfg.sample_rate and inputs shorter than one
// frame ("audio too short").
FeatureFrames ComputeFrames(const Waveform& wave, const FeatureConfig& cfg);

}  // namespace unitlm
