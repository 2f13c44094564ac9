// tests/unit/audio_io_test.cc

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

#include "spex/audio_io.h"

#include <cstdint>
#include <cstring>
#include <fstream>

#include <gtest/gtest.h>

#include "spex/error.h"
#include "test_util.h"

namespace spex {
namespace {

using testing::TempDir;

void PutU32(std::ofstream &f, std::uint32_t v) { f.write(reinterpret_cast<const char *>(&v), 4); }
void PutU16(std::ofstream &f, std::uint16_t v) { f.write(reinterpret_cast<const char *>(&v), 2); }

// Minimal RIFF writer for formats SaveWav does not produce.
void WriteRaw(const std::filesystem::path &p, std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
              std::uint16_t bits, const std::vector<char> &data) {
  std::ofstream f(p, std::ios::binary);
  f.write("RIFF", 4);
  PutU32(f, 36 + static_cast<std::uint32_t>(data.size()));
  f.write("WAVEfmt ", 8);
  PutU32(f, 16);
  PutU16(f, format);
  PutU16(f, channels);
  PutU32(f, rate);
  PutU32(f, rate * channels * bits / 8);
  PutU16(f, static_cast<std::uint16_t>(channels * bits / 8));
  PutU16(f, bits);
  f.write("data", 4);
  PutU32(f, static_cast<std::uint32_t>(data.size()));
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

TEST(AudioIoTest, RoundTripWithinOneQuantum) {
  TempDir dir;
  Waveform w = testing::Tone(440, 0.1, 0.7);
  SaveWav(w, dir / "a.wav");
  Waveform r = LoadWav(dir / "a.wav");
  ASSERT_EQ(r.size(), w.size());
  EXPECT_EQ(r.sample_rate_hz, 8000);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::abs(r.samples[i] - w.samples[i]), 1.0 / 32768);
  EXPECT_DOUBLE_EQ(r.duration_seconds(), 0.1);
}

TEST(AudioIoTest, ClipsOnSave) {
  TempDir dir;
  Waveform w;
  w.samples = {2.0, -3.0, 1.0, -1.0};
  SaveWav(w, dir / "c.wav");
  Waveform r = LoadWav(dir / "c.wav");
  EXPECT_DOUBLE_EQ(r.samples[0], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(r.samples[1], -1.0);
  EXPECT_DOUBLE_EQ(r.samples[2], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(r.samples[3], -1.0);
}

TEST(AudioIoTest, ReadsFloat32) {
  TempDir dir;
  std::vector<float> x = {0.25f, -0.5f, 0.125f};
  std::vector<char> bytes(x.size() * 4);
  std::memcpy(bytes.data(), x.data(), bytes.size());
  WriteRaw(dir / "f.wav", 3, 1, 8000, 32, bytes);
  Waveform r = LoadWav(dir / "f.wav");
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r.samples[1], -0.5);
}

TEST(AudioIoTest, Errors) {
  TempDir dir;
  try {
    LoadWav(dir / "missing.wav");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kNotFound);
  }
  WriteRaw(dir / "stereo.wav", 1, 2, 8000, 16, std::vector<char>(8, 0));
  try {
    LoadWav(dir / "stereo.wav");
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kUnsupportedFormat);
  }
  {
    std::ofstream f(dir / "junk.wav", std::ios::binary);
    f << "not a wave file at all";
  }
  EXPECT_THROW(LoadWav(dir / "junk.wav"), Error);
  WriteRaw(dir / "r16.wav", 1, 1, 16000, 16, std::vector<char>(8, 0));
  Waveform w16 = LoadWav(dir / "r16.wav");
  EXPECT_EQ(w16.sample_rate_hz, 16000);
  try {
    RequireModelRate(w16);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kSampleRateMismatch);
  }
}

TEST(AudioIoTest, RmsPower) {
  Waveform w;
  w.samples = {1.0, -1.0, 2.0, 0.0};
  EXPECT_DOUBLE_EQ(RmsPower(w), 1.5);
}

}  // namespace
}  // namespace spex
