// core/include/spex/mixsim.h

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

#ifndef SPEX_MIXSIM_H_
#define SPEX_MIXSIM_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spex/audio_io.h"

namespace spex {

struct Utterance {
  std::string id;
  std::filesystem::path path;
};

struct SpeakerUtterances {
  std::vector<Utterance> utterances;  // sorted by id
  // A target needs a second utterance to serve as its reference.
  bool eligible_as_target() const { return utterances.size() >= 2; }
};

using Corpus = std::map<std::string, SpeakerUtterances>;

/// Scans a `<speaker_id>/<utt_id>.wav` tree. Every file is opened to check
/// its sample rate. Throws kEmptyCorpus, kSampleRateMismatch.
Corpus ScanCorpus(const std::filesystem::path &dir);

/// FNV-1a hash (hex) over the sorted "speaker/utt" list.
std::string CorpusFingerprint(const Corpus &corpus);

/// One simulated mixture. Paths are relative to the manifest directory.
struct MixtureSpec {
  std::string id;
  std::string target_speaker;
  std::string target_utt;
  std::vector<std::string> interferer_speakers;
  std::vector<std::string> interferer_utts;
  std::string reference_utt;
  std::vector<double> snr_db;  // one per interferer
  std::vector<double> gains;   // one per interferer
  std::filesystem::path mixture_path;
  std::filesystem::path target_path;
  std::filesystem::path reference_path;
};

struct Manifest {
  std::vector<MixtureSpec> entries;
  std::uint64_t seed = 0;
  std::string corpus_fingerprint;
  std::filesystem::path base_dir;  // directory the relative paths resolve against

  std::filesystem::path Resolve(const std::filesystem::path &p) const {
    return p.is_absolute() ? p : base_dir / p;
  }
};

/// Gain g for the interferer so that
/// 10 log10(P(target) / (g^2 P(interferer))) == snr_db.
/// Throws kSilentSource when either power is zero.
double SnrGain(const Waveform &target, const Waveform &interferer, double snr_db);

struct MixResult {
  Waveform mixture;
  Waveform padded_target;
};

/// Zero-pads all sources to the longest and sums target + sum_i g_i b_i.
MixResult Mix(const Waveform &target, const std::vector<Waveform> &interferers,
              const std::vector<double> &gains);

struct SimulationOptions {
  std::size_t num_mixtures = 0;
  int speakers_per_mix = 2;
  double snr_lo_db = 0.0;
  double snr_hi_db = 5.0;
  std::uint64_t seed = 0;
  bool write_audio = true;
};

/// Draws mixtures with a per-entry generator seeded from (seed, index).
/// The first drawn speaker is the target; the reference is another
/// utterance of that speaker. Writes mix/, s1/, ref/ WAVs and
/// manifest.jsonl (+ manifest.meta.json) into out_dir.
/// Throws kInsufficientSpeakers, kInsufficientUtterances.
Manifest Simulate(const Corpus &corpus, const SimulationOptions &options,
                  const std::filesystem::path &out_dir);

/// Replaces each entry's reference with one of the requested duration,
/// built by concatenating the reference and then the target speaker's other
/// utterances (never the mixed target utterance), cycling as needed.
Manifest ExtendReferences(const Manifest &manifest, const Corpus &corpus,
                          double seconds, const std::filesystem::path &out_dir);

/// Deterministic JSONL form: fields id, mixture_path, target_path,
/// reference_path, target_speaker, interferer_speakers, snr_db, gains.
std::string SerializeManifestLine(const MixtureSpec &spec);
std::string SerializeManifest(const Manifest &manifest);

void WriteManifest(const Manifest &manifest, const std::filesystem::path &path);
Manifest ReadManifest(const std::filesystem::path &path);

}  // namespace spex

#endif  // SPEX_MIXSIM_H_
