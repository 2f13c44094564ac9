// core/include/spex/features.h

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

#ifndef SPEX_FEATURES_H_
#define SPEX_FEATURES_H_

#include <filesystem>
#include <vector>

#include "spex/audio_io.h"

namespace spex {

inline constexpr int kFeatureDim = 60;
inline constexpr int kFrameLength = 200;  // 25 ms at 8 kHz
inline constexpr int kFrameShift = 80;    // 10 ms at 8 kHz

/// Row-major (num_frames x 60) features: 19 cepstra + log-energy, then the
/// first and second order deltas of those 20.
struct FeatureFrameSequence {
  int num_frames = 0;
  std::vector<double> frames;
  // Per-frame log-energy before mean normalization; drives the VAD.
  std::vector<double> log_energy;
  int frame_shift_ms = 10;
  int frame_length_ms = 25;

  double at(int t, int d) const { return frames[static_cast<std::size_t>(t) * kFeatureDim + d]; }
  double &at(int t, int d) { return frames[static_cast<std::size_t>(t) * kFeatureDim + d]; }
};

struct FeatureOptions {
  bool apply_cmn = true;
  int cmn_window_frames = 300;  // 3 s
  bool apply_vad = true;
  double vad_threshold_db = 30.0;
};

int NumFrames(std::size_t num_samples);

/// MFCC + energy with deltas and sliding-window CMN. Throws kTooShort for
/// fewer than 200 samples and kSampleRateMismatch off 8 kHz.
FeatureFrameSequence MfccFeatures(const Waveform &wave, const FeatureOptions &opts = {});

/// Keeps frames whose log-energy is within threshold_db of the utterance
/// peak. The peak frame is always kept.
std::vector<bool> EnergyVad(const FeatureFrameSequence &features, double threshold_db = 30.0);

FeatureFrameSequence SelectFrames(const FeatureFrameSequence &features,
                                  const std::vector<bool> &keep);

/// Regression deltas over +-2 frames with edge replication, applied
/// column-wise to a row-major (num_frames x dim) block.
std::vector<double> ComputeDeltas(const std::vector<double> &x, int num_frames, int dim);

/// Subtracts the mean over a centered window of `window` frames, shifted to
/// stay inside the utterance.
void SlidingCmn(std::vector<double> &x, int num_frames, int dim, int window);

/// Speaker-encoder front-end: features, then VAD selection when enabled.
FeatureFrameSequence SpeakerFeatures(const Waveform &wave, const FeatureOptions &opts = {});

/// Debug dump: int32 num_frames, int32 dim, then row-major float32.
void WriteFeatureDump(const FeatureFrameSequence &features, const std::filesystem::path &path);

}  // namespace spex

#endif  // SPEX_FEATURES_H_
