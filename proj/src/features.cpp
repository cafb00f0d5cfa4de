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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "unitlm/audio.hpp"
#include "unitlm/error.hpp"

namespace unitlm {
namespace {

// FFTW planning is not thread-safe; execution with new arrays is. Plans are
// created once per size under a lock and then shared.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const FftPlans& PlansFor(int n) {
  static std::mutex mu;
  static std::map<int, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  double* real = fftw_alloc_real(static_cast<std::size_t>(n));
  fftw_complex* cplx = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
  FftPlans plans;
  plans.forward = fftw_plan_dft_r2c_1d(n, real, cplx, FFTW_ESTIMATE);
  plans.inverse = fftw_plan_dft_c2r_1d(n, cplx, real, FFTW_ESTIMATE);
  fftw_free(real);
  fftw_free(cplx);
  return cache.emplace(n, plans).first->second;
}

struct FftwBuffers {
  explicit FftwBuffers(int n)
      : real(fftw_alloc_real(static_cast<std::size_t>(n))),
        cplx(fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1))) {}
  ~FftwBuffers() {
    fftw_free(real);
    fftw_free(cplx);
  }
  FftwBuffers(const FftwBuffers&) = delete;
  FftwBuffers& operator=(const FftwBuffers&) = delete;

  double* real;
  fftw_complex* cplx;
};

}  // namespace

int FeatureConfig::FrameLength() const {
  return int(std::lround(sample_rate * frame_length_ms / 1000.0));
}

int FeatureConfig::FrameShift() const {
  return int(std::lround(sample_rate * frame_shift_ms / 1000.0));
}

int FeatureConfig::FftSize() const {
  int n = 1;
  while (n < FrameLength()) n <<= 1;
  return n;
}

double FeatureConfig::HighFreq() const {
  return high_freq > 0.0 ? high_freq : sample_rate / 2.0;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> MelFilterbank(const FeatureConfig& cfg) {
  const int bins = cfg.NumBins();
  const int mels = cfg.num_mel_bins;
  const double lo = HzToMel(cfg.low_freq);
  const double hi = HzToMel(cfg.HighFreq());
  const double step = (hi - lo) / (mels + 1);
  std::vector<double> weights(static_cast<std::size_t>(mels) * bins, 0.0);
  for (int m = 0; m < mels; ++m) {
    const double left = lo + m * step;
    const double center = left + step;
    const double right = center + step;
    for (int b = 0; b < bins; ++b) {
      const double mel = HzToMel(double(b) * cfg.sample_rate / cfg.FftSize());
      double w = 0.0;
      if (mel > left && mel <= center) {
        w = (mel - left) / (center - left);
      } else if (mel > center && mel < right) {
        w = (right - mel) / (right - center);
      }
      weights[std::size_t(m) * bins + b] = w;
    }
  }
  return weights;
}

std::vector<double> HannWindow(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
  }
  return w;
}

Stft::Stft(const FeatureConfig& cfg)
    : frame_length_(cfg.FrameLength()),
      hop_(cfg.FrameShift()),
      fft_size_(cfg.FftSize()),
      window_(HannWindow(cfg.FrameLength())) {
  Require(frame_length_ > 0 && hop_ > 0, "frame length and hop must be positive");
}

int Stft::NumFrames(std::size_t num_samples) const {
  if (num_samples < std::size_t(frame_length_)) return 0;
  return int((num_samples - frame_length_) / hop_) + 1;
}

std::vector<std::complex<double>> Stft::Forward(
    std::span<const double> signal) const {
  const int frames = NumFrames(signal.size());
  const int bins = num_bins();
  std::vector<std::complex<double>> out(static_cast<std::size_t>(frames) * bins);
  const FftPlans& plans = PlansFor(fft_size_);
#pragma omp parallel
  {
    FftwBuffers buf(fft_size_);
#pragma omp for schedule(static)
    for (int f = 0; f < frames; ++f) {
      const double* src = signal.data() + std::size_t(f) * hop_;
      for (int i = 0; i < frame_length_; ++i) buf.real[i] = src[i] * window_[i];
      for (int i = frame_length_; i < fft_size_; ++i) buf.real[i] = 0.0;
      fftw_execute_dft_r2c(plans.forward, buf.real, buf.cplx);
      for (int b = 0; b < bins; ++b) {
        out[std::size_t(f) * bins + b] = {buf.cplx[b][0], buf.cplx[b][1]};
      }
    }
  }
  return out;
}

std::vector<double> Stft::Inverse(std::span<const std::complex<double>> spectra,
                                  int num_frames) const {
  if (num_frames <= 0) return {};
  const int bins = num_bins();
  const std::size_t length = std::size_t(num_frames - 1) * hop_ + frame_length_;
  std::vector<double> frames(static_cast<std::size_t>(num_frames) * frame_length_);
  const FftPlans& plans = PlansFor(fft_size_);
#pragma omp parallel
  {
    FftwBuffers buf(fft_size_);
#pragma omp for schedule(static)
    for (int f = 0; f < num_frames; ++f) {
      for (int b = 0; b < bins; ++b) {
        buf.cplx[b][0] = spectra[std::size_t(f) * bins + b].real();
        buf.cplx[b][1] = spectra[std::size_t(f) * bins + b].imag();
      }
      fftw_execute_dft_c2r(plans.inverse, buf.cplx, buf.real);
      for (int i = 0; i < frame_length_; ++i) {
        frames[std::size_t(f) * frame_length_ + i] =
            buf.real[i] / fft_size_ * window_[i];
      }
    }
  }
  // Overlap-add is serial so the summation order is fixed.
  std::vector<double> out(length, 0.0);
  std::vector<double> norm(length, 0.0);
  for (int f = 0; f < num_frames; ++f) {
    const std::size_t start = std::size_t(f) * hop_;
    for (int i = 0; i < frame_length_; ++i) {
      out[start + i] += frames[std::size_t(f) * frame_length_ + i];
      norm[start + i] += window_[i] * window_[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (norm[i] > 1e-8) out[i] /= norm[i];
  }
  return out;
}

FeatureFrames ComputeFrames(const Waveform& wave, const FeatureConfig& cfg) {
  Require(cfg.num_mel_bins > 0, "num_mel_bins must be positive");
  if (wave.sample_rate != cfg.sample_rate) {
    Fail(ErrorKind::kData, "unsupported sample rate " +
                               std::to_string(wave.sample_rate) + " (expected " +
                               std::to_string(cfg.sample_rate) + ")");
  }
  if (wave.samples.size() < std::size_t(cfg.FrameLength())) {
    Fail(ErrorKind::kData, "audio too short");
  }
  std::vector<double> signal(wave.samples.size());
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const float s = wave.samples[i];
    if (!std::isfinite(s) || s < -1.0f || s > 1.0f) {
      Fail(ErrorKind::kData, "sample out of range at index " + std::to_string(i));
    }
    signal[i] = s;
  }
  const Stft stft(cfg);
  const auto spectra = stft.Forward(signal);
  const auto filters = MelFilterbank(cfg);
  const int frames = stft.NumFrames(signal.size());
  const int bins = stft.num_bins();
  const int mels = cfg.num_mel_bins;

  FeatureFrames out;
  out.num_frames = frames;
  out.feature_dim = mels;
  out.frame_shift_ms = cfg.frame_shift_ms;
  out.values.resize(static_cast<std::size_t>(frames) * mels);
#pragma omp parallel
  {
    std::vector<double> mag(static_cast<std::size_t>(bins));
#pragma omp for schedule(static)
    for (int f = 0; f < frames; ++f) {
      for (int b = 0; b < bins; ++b) {
        mag[b] = std::abs(spectra[std::size_t(f) * bins + b]);
      }
      for (int m = 0; m < mels; ++m) {
        const double* w = filters.data() + std::size_t(m) * bins;
        double energy = 0.0;
        for (int b = 0; b < bins; ++b) energy += w[b] * mag[b];
        out.values[std::size_t(f) * mels + m] =
            float(std::log(energy + cfg.log_floor));
      }
    }
  }
  return out;
}

}  // namespace unitlm
