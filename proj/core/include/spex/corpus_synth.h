// core/include/spex/corpus_synth.h

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

#ifndef SPEX_CORPUS_SYNTH_H_
#define SPEX_CORPUS_SYNTH_H_

#include <cstdint>
#include <filesystem>

#include "spex/audio_io.h"
#include "spex/mixsim.h"
#include "spex/rng.h"

namespace spex {

/// Voice parameters of a synthetic talker.
struct SynthVoice {
  double f0_hz = 120.0;          // mean pitch
  double formant_scale = 1.0;    // vocal-tract length factor
  double tilt = 1.0;             // spectral slope exponent
  double breathiness = 0.02;     // noise-to-harmonic ratio
};

SynthVoice MakeSynthVoice(std::uint64_t seed, std::size_t speaker_index);

/// Speech-like signal: voiced syllables with formant-shaped harmonics,
/// unvoiced bursts and pauses, at 8 kHz.
Waveform SynthesizeUtterance(const SynthVoice &voice, double seconds, Rng &rng);

struct SynthCorpusOptions {
  std::size_t num_speakers = 20;
  std::size_t utterances_per_speaker = 8;
  double min_seconds = 2.0;
  double max_seconds = 4.0;
  std::uint64_t seed = 0;
};

/// Writes <dir>/spkNNN/uttNN.wav and returns the scanned corpus.
Corpus WriteSynthCorpus(const SynthCorpusOptions &options, const std::filesystem::path &dir);

}  // namespace spex

#endif  // SPEX_CORPUS_SYNTH_H_
