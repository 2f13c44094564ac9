// core/include/spex/audio_io.h

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

#ifndef SPEX_AUDIO_IO_H_
#define SPEX_AUDIO_IO_H_

#include <filesystem>
#include <string>
#include <vector>

namespace spex {

inline constexpr int kModelSampleRate = 8000;

/// Mono time-domain signal. Samples are kept in double precision in memory;
/// files are 16-bit PCM.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kModelSampleRate;
  std::string source_id;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Reads a mono RIFF/WAVE file (16-bit PCM or 32-bit IEEE float). PCM is
/// scaled by 1/32768. Throws Error{kNotFound, kUnsupportedFormat}.
Waveform LoadWav(const std::filesystem::path &path);

/// Writes 16-bit PCM mono. Samples are clipped to [-1, 1] before
/// quantization. Throws Error{kIoError}.
void SaveWav(const Waveform &wave, const std::filesystem::path &path);

/// Mean of squared samples.
double RmsPower(const Waveform &wave);
double RmsPower(const std::vector<double> &samples);

/// Throws kSampleRateMismatch unless the waveform is at the model rate.
void RequireModelRate(const Waveform &wave);

}  // namespace spex

#endif  // SPEX_AUDIO_IO_H_
