// tests/unit/features_test.cc

// Copyright 2026 SpEx Toolkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "spex/features.h"

#include <cmath>
#include <fstream>
#include <numbers>

#include <gtest/gtest.h>

#include "spex/error.h"
#include "test_util.h"

namespace spex {
namespace {

// Static coefficients of one frame from a direct DFT: 19 cepstra, log-energy.
std::vector<double> OracleFrame(const std::vector<double> &x, std::size_t start) {
  const int N = 512, L = 200, M = 40;
  std::vector<double> frame(N, 0.0);
  double energy = 0;
  for (int n = 0; n < L; ++n) {
    frame[n] = x[start + n] * (0.54 - 0.46 * std::cos(2 * std::numbers::pi * n / (L - 1)));
    energy += frame[n] * frame[n];
  }
  std::vector<double> mag(N / 2 + 1);
  for (int k = 0; k <= N / 2; ++k) {
    double re = 0, im = 0;
    for (int n = 0; n < N; ++n) {
      re += frame[n] * std::cos(2 * std::numbers::pi * k * n / N);
      im -= frame[n] * std::sin(2 * std::numbers::pi * k * n / N);
    }
    mag[k] = std::sqrt(re * re + im * im);
  }
  auto mel = [](double hz) { return 1127.0 * std::log(1 + hz / 700.0); };
  const double top = mel(4000.0);
  std::vector<double> logmel(M);
  for (int m = 0; m < M; ++m) {
    const double lo = top * m / (M + 1), mid = top * (m + 1) / (M + 1), hi = top * (m + 2) / (M + 1);
    double acc = 0;
    for (int k = 0; k <= N / 2; ++k) {
      const double v = mel(k * 8000.0 / N);
      double w = 0;
      if (v > lo && v <= mid) w = (v - lo) / (mid - lo);
      if (v > mid && v < hi) w = (hi - v) / (hi - mid);
      acc += w * mag[k];
    }
    logmel[m] = std::log(std::max(acc, 1e-10));
  }
  std::vector<double> out;
  for (int j = 1; j <= 19; ++j) {
    double c = 0;
    for (int m = 0; m < M; ++m) c += std::sqrt(2.0 / M) * std::cos(std::numbers::pi * j * (m + 0.5) / M) * logmel[m];
    out.push_back(c);
  }
  out.push_back(std::log(energy));
  return out;
}

Waveform Noisy(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w = testing::Tone(350, seconds, 0.3);
  for (auto &s : w.samples) s += 0.05 * rng.Normal();
  return w;
}

TEST(FeaturesTest, FrameCountAndShape) {
  EXPECT_EQ(NumFrames(199), 0);
  EXPECT_EQ(NumFrames(200), 1);
  EXPECT_EQ(NumFrames(279), 1);
  EXPECT_EQ(NumFrames(280), 2);
  EXPECT_EQ(NumFrames(8000), 98);
  auto f = MfccFeatures(Noisy(1.0, 1));
  EXPECT_EQ(f.num_frames, 98);
  EXPECT_EQ(f.frames.size(), 98u * 60u);
  EXPECT_EQ(f.frame_shift_ms, 10);
  EXPECT_EQ(f.frame_length_ms, 25);
}

TEST(FeaturesTest, StaticCoefficientsMatchDirectDft) {
  Waveform w = Noisy(0.3, 2);
  FeatureOptions o;
  o.apply_cmn = false;
  auto f = MfccFeatures(w, o);
  for (int t : {0, 7, f.num_frames - 1}) {
    auto want = OracleFrame(w.samples, static_cast<std::size_t>(t) * 80);
    for (int d = 0; d < 20; ++d) EXPECT_NEAR(f.at(t, d), want[d], 1e-9) << "t=" << t << " d=" << d;
    EXPECT_NEAR(f.log_energy[t], want[19], 1e-9);
  }
}

TEST(FeaturesTest, DeltasOfRampAreSlope) {
  const int T = 12, D = 2;
  std::vector<double> x(T * D);
  for (int t = 0; t < T; ++t) {
    x[t * D] = 3.0 * t;
    x[t * D + 1] = -0.5 * t + 1;
  }
  auto d = ComputeDeltas(x, T, D);
  for (int t = 2; t < T - 2; ++t) {
    EXPECT_NEAR(d[t * D], 3.0, 1e-12);
    EXPECT_NEAR(d[t * D + 1], -0.5, 1e-12);
  }
  // Edge replication: at t = 0 the window is (0, 0, 0, 3, 6) for slope 3.
  EXPECT_NEAR(d[0], (1 * (3 - 0) + 2 * (6 - 0)) / 10.0, 1e-12);
}

TEST(FeaturesTest, DeltaBlocksDeriveFromStatics) {
  FeatureOptions o;
  o.apply_cmn = false;
  auto f = MfccFeatures(Noisy(0.5, 3), o);
  std::vector<double> base(f.num_frames * 20);
  for (int t = 0; t < f.num_frames; ++t)
    for (int c = 0; c < 20; ++c) base[t * 20 + c] = f.at(t, c);
  auto d1 = ComputeDeltas(base, f.num_frames, 20);
  auto d2 = ComputeDeltas(d1, f.num_frames, 20);
  for (int t = 0; t < f.num_frames; ++t)
    for (int c = 0; c < 20; ++c) {
      EXPECT_DOUBLE_EQ(f.at(t, 20 + c), d1[t * 20 + c]);
      EXPECT_DOUBLE_EQ(f.at(t, 40 + c), d2[t * 20 + c]);
    }
}

TEST(FeaturesTest, CmnGivesZeroMeanWhenWindowCoversUtterance) {
  auto f = MfccFeatures(Noisy(2.5, 4));
  ASSERT_LE(f.num_frames, 300);
  for (int d = 0; d < 60; ++d) {
    double mean = 0;
    for (int t = 0; t < f.num_frames; ++t) mean += f.at(t, d) / f.num_frames;
    EXPECT_NEAR(mean, 0.0, 1e-9) << d;
  }
}

TEST(FeaturesTest, SlidingCmnUsesClampedWindow) {
  const int T = 10, W = 4;
  std::vector<double> x(T);
  for (int t = 0; t < T; ++t) x[t] = t * t;
  auto y = x;
  SlidingCmn(y, T, 1, W);
  for (int t = 0; t < T; ++t) {
    int start = std::clamp(t - W / 2, 0, T - W);
    double mean = 0;
    for (int s = start; s < start + W; ++s) mean += x[s] / W;
    EXPECT_NEAR(y[t], x[t] - mean, 1e-12) << t;
  }
}

TEST(FeaturesTest, VadDropsSilenceAndKeepsPeak) {
  Waveform w = testing::Tone(400, 0.5, 0.5);
  w.samples.insert(w.samples.end(), 4000, 0.0);
  auto f = MfccFeatures(w);
  auto keep = EnergyVad(f, 30.0);
  int kept = 0;
  for (bool k : keep) kept += k;
  EXPECT_GT(kept, 40);
  EXPECT_LT(kept, f.num_frames - 40);
  EXPECT_FALSE(keep.back());
  auto s = SpeakerFeatures(w);
  EXPECT_EQ(s.num_frames, kept);
  FeatureOptions off;
  off.apply_vad = false;
  EXPECT_EQ(SpeakerFeatures(w, off).num_frames, f.num_frames);
}

TEST(FeaturesTest, Errors) {
  Waveform shortw = testing::Tone(400, 0.02);
  try {
    MfccFeatures(shortw);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kTooShort);
  }
  Waveform fast = testing::Tone(400, 0.1, 0.5, 16000);
  try {
    MfccFeatures(fast);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kSampleRateMismatch);
  }
}

TEST(FeaturesTest, DumpLayout) {
  testing::TempDir dir;
  auto f = MfccFeatures(Noisy(0.2, 5));
  WriteFeatureDump(f, dir / "f.bin");
  std::ifstream in(dir / "f.bin", std::ios::binary);
  std::int32_t header[2];
  in.read(reinterpret_cast<char *>(header), sizeof header);
  EXPECT_EQ(header[0], f.num_frames);
  EXPECT_EQ(header[1], 60);
  float first;
  in.read(reinterpret_cast<char *>(&first), sizeof first);
  EXPECT_FLOAT_EQ(first, static_cast<float>(f.frames[0]));
}

}  // namespace
}  // namespace spex
