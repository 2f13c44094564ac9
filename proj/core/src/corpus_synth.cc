// core/src/corpus_synth.cc

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

#include "spex/corpus_synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "spex/error.h"

namespace spex {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// F1-F3 of a few vowels for an adult male tract.
constexpr std::array<std::array<double, 3>, 6> kVowels = {{
    {730, 1090, 2440},
    {270, 2290, 3010},
    {530, 1840, 2480},
    {570, 840, 2410},
    {300, 870, 2240},
    {660, 1720, 2410},
}};

double FormantGain(double f, const std::array<double, 3> &formants, double scale) {
  static constexpr double kBandwidth[3] = {90, 110, 170};
  static constexpr double kLevel[3] = {1.0, 0.6, 0.3};
  double g = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = (f - formants[k] * scale) / kBandwidth[k];
    g += kLevel[k] / (1.0 + d * d);
  }
  return g;
}

void AddSyllable(std::vector<double> &out, std::size_t start, std::size_t length, const SynthVoice &voice,
                 Rng &rng) {
  const auto &a = kVowels[rng.Index(kVowels.size())];
  const auto &b = kVowels[rng.Index(kVowels.size())];
  const double f0_start = voice.f0_hz * rng.Uniform(0.85, 1.15);
  const double f0_end = voice.f0_hz * rng.Uniform(0.85, 1.15);
  const double vibrato = rng.Uniform(3.0, 6.0);
  const double fs = kModelSampleRate;
  double phase = 0.0;
  for (std::size_t n = 0; n < length && start + n < out.size(); ++n) {
    const double u = static_cast<double>(n) / static_cast<double>(length);
    const double f0 = (f0_start + (f0_end - f0_start) * u) * (1.0 + 0.02 * std::sin(kTwoPi * vibrato * n / fs));
    phase += kTwoPi * f0 / fs;
    std::array<double, 3> formants;
    for (int k = 0; k < 3; ++k) formants[k] = a[k] + (b[k] - a[k]) * u;
    double s = 0.0;
    for (int h = 1; h * f0 < 0.95 * fs / 2; ++h) {
      const double f = h * f0;
      s += FormantGain(f, formants, voice.formant_scale) * std::pow(h, -voice.tilt) * std::sin(h * phase);
    }
    s += voice.breathiness * rng.Normal();
    const double env = std::sin(std::numbers::pi * u);
    out[start + n] += env * s;
  }
}

void AddBurst(std::vector<double> &out, std::size_t start, std::size_t length, Rng &rng) {
  double prev = 0.0;
  for (std::size_t n = 0; n < length && start + n < out.size(); ++n) {
    const double u = static_cast<double>(n) / static_cast<double>(length);
    const double white = rng.Normal();
    out[start + n] += 0.15 * std::sin(std::numbers::pi * u) * (white - 0.7 * prev);
    prev = white;
  }
}

}  // namespace

SynthVoice MakeSynthVoice(std::uint64_t seed, std::size_t speaker_index) {
  Rng rng(seed ^ 0x5eed5eedULL, speaker_index);
  SynthVoice v;
  // Alternate low and high registers so neighbours differ in pitch.
  v.f0_hz = speaker_index % 2 == 0 ? rng.Uniform(85.0, 155.0) : rng.Uniform(165.0, 260.0);
  v.formant_scale = v.f0_hz < 160 ? rng.Uniform(0.9, 1.05) : rng.Uniform(1.08, 1.25);
  v.tilt = rng.Uniform(0.6, 1.4);
  v.breathiness = rng.Uniform(0.005, 0.04);
  return v;
}

Waveform SynthesizeUtterance(const SynthVoice &voice, double seconds, Rng &rng) {
  const auto total = static_cast<std::size_t>(std::llround(seconds * kModelSampleRate));
  std::vector<double> x(total, 0.0);
  std::size_t pos = static_cast<std::size_t>(rng.Uniform(0.05, 0.2) * kModelSampleRate);
  while (pos < total) {
    if (rng.Uniform() < 0.2) {
      const auto len = static_cast<std::size_t>(rng.Uniform(0.03, 0.08) * kModelSampleRate);
      AddBurst(x, pos, len, rng);
      pos += len;
    }
    const auto len = static_cast<std::size_t>(rng.Uniform(0.08, 0.3) * kModelSampleRate);
    AddSyllable(x, pos, len, voice, rng);
    pos += len + static_cast<std::size_t>(rng.Uniform(0.02, 0.15) * kModelSampleRate);
  }
  const double rms = std::sqrt(RmsPower(x));
  const double level = rng.Uniform(0.05, 0.12);
  if (rms > 0)
    for (double &v : x) v = std::clamp(v * level / rms, -1.0, 1.0);
  Waveform w;
  w.samples = std::move(x);
  w.sample_rate_hz = kModelSampleRate;
  return w;
}

Corpus WriteSynthCorpus(const SynthCorpusOptions &options, const std::filesystem::path &dir) {
  if (options.num_speakers == 0 || options.utterances_per_speaker == 0)
    throw Error(Errc::kRangeError, "synthetic corpus needs speakers and utterances");
  if (!(options.min_seconds > 0 && options.max_seconds >= options.min_seconds))
    throw Error(Errc::kRangeError, "invalid utterance duration range");
  for (std::size_t s = 0; s < options.num_speakers; ++s) {
    const SynthVoice voice = MakeSynthVoice(options.seed, s);
    char spk[32];
    std::snprintf(spk, sizeof spk, "spk%03zu", s);
    std::filesystem::create_directories(dir / spk);
    for (std::size_t u = 0; u < options.utterances_per_speaker; ++u) {
      Rng rng(options.seed, s * 1000003ULL + u);
      Waveform w = SynthesizeUtterance(voice, rng.Uniform(options.min_seconds, options.max_seconds), rng);
      char utt[32];
      std::snprintf(utt, sizeof utt, "utt%02zu.wav", u);
      SaveWav(w, dir / spk / utt);
    }
  }
  return ScanCorpus(dir);
}

}  // namespace spex
