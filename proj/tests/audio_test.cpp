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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <string>

#include "test_support.hpp"
#include "unitlm/audio.hpp"
#include "unitlm/error.hpp"

namespace unitlm {
namespace {

using testing::TempDir;
using testing::Tone;

void PutU32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
void PutU16(std::string& s, std::uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char(v >> 8));
}

// Hand-built RIFF header so malformed variants can be produced.
std::string WavBytes(std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                     const std::vector<std::int16_t>& samples) {
  std::string s = "RIFF";
  PutU32(s, 36 + 2 * std::uint32_t(samples.size()));
  s += "WAVEfmt ";
  PutU32(s, 16);
  PutU16(s, format);
  PutU16(s, channels);
  PutU32(s, 16000);
  PutU32(s, 16000 * channels * bits / 8);
  PutU16(s, std::uint16_t(channels * bits / 8));
  PutU16(s, bits);
  s += "data";
  PutU32(s, 2 * std::uint32_t(samples.size()));
  for (auto v : samples) PutU16(s, std::uint16_t(v));
  return s;
}

void WriteFile(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
}

std::string ErrorMessage(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(Wav, SilenceLoadsAsZeros) {
  TempDir dir("wav");
  WriteFile(dir / "s.wav", WavBytes(1, 1, 16, std::vector<std::int16_t>(16000, 0)));
  const Waveform w = LoadWav(dir / "s.wav");
  EXPECT_EQ(w.sample_rate, 16000);
  ASSERT_EQ(w.samples.size(), 16000u);
  for (float s : w.samples) EXPECT_EQ(s, 0.0f);
}

TEST(Wav, MinimumSampleIsMinusOne) {
  TempDir dir("wav");
  WriteFile(dir / "m.wav", WavBytes(1, 1, 16, {-32768, 16384}));
  const Waveform w = LoadWav(dir / "m.wav");
  EXPECT_EQ(w.samples[0], -1.0f);
  EXPECT_EQ(w.samples[1], 0.5f);
}

TEST(Wav, ErrorsAreDistinct) {
  TempDir dir("wav");
  WriteFile(dir / "stereo.wav", WavBytes(1, 2, 16, {0, 0}));
  WriteFile(dir / "float.wav", WavBytes(3, 1, 16, {0}));
  WriteFile(dir / "short.wav", std::string("RIFF\x10\0\0\0WA", 10));
  const auto stereo = ErrorMessage([&] { LoadWav(dir / "stereo.wav"); });
  const auto non_pcm = ErrorMessage([&] { LoadWav(dir / "float.wav"); });
  const auto truncated = ErrorMessage([&] { LoadWav(dir / "short.wav"); });
  const auto missing = ErrorMessage([&] { LoadWav(dir / "absent.wav"); });
  EXPECT_NE(stereo.find("unsupported channel count"), std::string::npos) << stereo;
  EXPECT_NE(non_pcm.find("not PCM"), std::string::npos) << non_pcm;
  EXPECT_NE(truncated.find("truncated header"), std::string::npos) << truncated;
  EXPECT_NE(missing.find("cannot open"), std::string::npos) << missing;
}

TEST(Wav, SaveLoadRoundTripWithinQuantization) {
  TempDir dir("wav");
  const Waveform w = Tone({300.0, 1200.0}, 0.1);
  SaveWav(dir / "t.wav", w);
  const Waveform r = LoadWav(dir / "t.wav");
  ASSERT_EQ(r.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    EXPECT_NEAR(r.samples[i], w.samples[i], 1.0 / 32768.0);
  }
}

TEST(Features, SilenceGivesFloorEverywhere) {
  Waveform w;
  w.samples.assign(16000, 0.0f);
  const FeatureFrames f = ComputeFrames(w, {});
  EXPECT_EQ(f.num_frames, 49);
  EXPECT_EQ(f.feature_dim, 40);
  const float floor = float(std::log(1e-6));
  for (float v : f.values) EXPECT_EQ(v, floor);
}

TEST(Features, FrameCountFormula) {
  for (int n : {400, 401, 719, 720, 12345}) {
    Waveform w;
    w.samples.assign(std::size_t(n), 0.1f);
    EXPECT_EQ(ComputeFrames(w, {}).num_frames, (n - 400) / 320 + 1) << n;
  }
}

TEST(Features, TooShortAndWrongRateAreRejected) {
  Waveform w;
  w.samples.assign(300, 0.0f);
  EXPECT_NE(ErrorMessage([&] { ComputeFrames(w, {}); }).find("audio too short"),
            std::string::npos);
  w.samples.assign(16000, 0.0f);
  w.sample_rate = 8000;
  EXPECT_NE(ErrorMessage([&] { ComputeFrames(w, {}); }).find("unsupported sample rate"),
            std::string::npos);
}

// Filter whose triangle peaks closest to 440 Hz, computed from the HTK mel
// formula with 40 bins spanning 0..8000 Hz: edges m_i = i * mel(8000) / 41,
// filter j peaks at m_{j+1}. mel(440) = 549.6 lies 0.93 of the way up filter
// 7's rising edge (484.9 -> 554.2) and on filter 6's tail, so bin 7.
TEST(Features, Sine440PeaksInMelBin7) {
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  const double m440 = 2595.0 * std::log10(1.0 + 440.0 / 700.0);
  int expected = -1;
  double best = -1.0;
  for (int j = 0; j < 40; ++j) {
    const double lo = j * top / 41, mid = (j + 1) * top / 41, hi = (j + 2) * top / 41;
    const double wgt = m440 < lo || m440 > hi ? 0.0
                       : m440 <= mid         ? (m440 - lo) / (mid - lo)
                                             : (hi - m440) / (hi - mid);
    if (wgt > best) best = wgt, expected = j;
  }
  ASSERT_EQ(expected, 7);

  const FeatureFrames f = ComputeFrames(Tone({440.0}, 1.0, 1.0), {});
  std::vector<double> mean(40, 0.0);
  for (int i = 0; i < f.num_frames; ++i) {
    for (int b = 0; b < 40; ++b) mean[std::size_t(b)] += f.Row(i)[std::size_t(b)];
  }
  const auto argmax = std::max_element(mean.begin(), mean.end()) - mean.begin();
  EXPECT_EQ(argmax, expected);
}

TEST(Features, OneHopShiftCovariance) {
  const Waveform w = Tone({220.0, 1000.0, 3100.0}, 0.5);
  Waveform shifted;
  shifted.samples.assign(320, 0.0f);
  shifted.samples.insert(shifted.samples.end(), w.samples.begin(), w.samples.end());
  const FeatureFrames a = ComputeFrames(w, {});
  const FeatureFrames b = ComputeFrames(shifted, {});
  ASSERT_EQ(b.num_frames, a.num_frames + 1);
  for (int i = 1; i < b.num_frames; ++i) {
    for (int d = 0; d < 40; ++d) {
      EXPECT_NEAR(b.Row(i)[std::size_t(d)], a.Row(i - 1)[std::size_t(d)], 1e-9);
    }
  }
}

TEST(Features, DeterministicAndFinite) {
  const Waveform w = Tone({523.0, 2000.0}, 0.3);
  const FeatureFrames a = ComputeFrames(w, {});
  const FeatureFrames b = ComputeFrames(w, {});
  EXPECT_EQ(a.values, b.values);
  for (float v : a.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(Features, MelScaleRoundTrip) {
  for (double hz : {0.0, 100.0, 440.0, 1000.0, 7999.0}) {
    EXPECT_NEAR(MelToHz(HzToMel(hz)), hz, 1e-9);
  }
  EXPECT_NEAR(HzToMel(1000.0), 999.9855, 1e-3);
}

TEST(Features, StftInverseReconstructsInterior) {
  const FeatureConfig cfg;
  const Stft stft(cfg);
  const Waveform w = Tone({700.0}, 0.2);
  std::vector<double> x(w.samples.begin(), w.samples.end());
  const int frames = stft.NumFrames(x.size());
  const auto y = stft.Inverse(stft.Forward(x), frames);
  for (std::size_t i = 400; i + 400 < y.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-9);
}

}  // namespace
}  // namespace unitlm
