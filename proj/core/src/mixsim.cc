// core/src/mixsim.cc

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

#include "spex/mixsim.h"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spex/error.h"
#include "spex/rng.h"

namespace spex {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string FormatNumber(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string Quote(const std::string &s) { return json(s).dump(); }

std::string NumberList(const std::vector<double> &values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += FormatNumber(values[i]);
  }
  return out + "]";
}

std::string StringList(const std::vector<std::string> &values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += Quote(values[i]);
  }
  return out + "]";
}

std::vector<double> PadTo(const std::vector<double> &x, std::size_t n) {
  std::vector<double> out(n, 0.0);
  std::copy(x.begin(), x.end(), out.begin());
  return out;
}

const Utterance &FindUtterance(const Corpus &corpus, const std::string &speaker,
                               const std::string &utt) {
  const auto &utts = corpus.at(speaker).utterances;
  auto it = std::find_if(utts.begin(), utts.end(),
                         [&](const Utterance &u) { return u.id == utt; });
  if (it == utts.end()) throw Error(Errc::kNotFound, speaker + "/" + utt);
  return *it;
}

Waveform LoadModelWav(const fs::path &path) {
  Waveform w = LoadWav(path);
  RequireModelRate(w);
  return w;
}

}  // namespace

Corpus ScanCorpus(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::kNotFound, dir.string());
  Corpus corpus;
  for (const auto &spk_entry : fs::directory_iterator(dir)) {
    if (!spk_entry.is_directory()) continue;
    SpeakerUtterances speaker;
    for (const auto &f : fs::directory_iterator(spk_entry.path())) {
      if (!f.is_regular_file() || f.path().extension() != ".wav") continue;
      Waveform w = LoadWav(f.path());
      if (w.sample_rate_hz != kModelSampleRate) {
        throw Error(Errc::kSampleRateMismatch,
                    f.path().string() + " is at " + std::to_string(w.sample_rate_hz) + " Hz");
      }
      speaker.utterances.push_back({f.path().stem().string(), f.path()});
    }
    if (speaker.utterances.empty()) continue;
    std::sort(speaker.utterances.begin(), speaker.utterances.end(),
              [](const Utterance &a, const Utterance &b) { return a.id < b.id; });
    corpus.emplace(spk_entry.path().filename().string(), std::move(speaker));
  }
  if (corpus.empty()) throw Error(Errc::kEmptyCorpus, "no utterances under " + dir.string());
  return corpus;
}

std::string CorpusFingerprint(const Corpus &corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto &[speaker, entry] : corpus) {
    for (const auto &utt : entry.utterances) {
      for (char c : speaker + "/" + utt.id + "\n") {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

double SnrGain(const Waveform &target, const Waveform &interferer, double snr_db) {
  const double pt = RmsPower(target), pi = RmsPower(interferer);
  if (pt <= 0.0) throw Error(Errc::kSilentSource, "target " + target.source_id + " is silent");
  if (pi <= 0.0) throw Error(Errc::kSilentSource, "interferer " + interferer.source_id + " is silent");
  return std::sqrt(pt / (pi * std::pow(10.0, snr_db / 10.0)));
}

MixResult Mix(const Waveform &target, const std::vector<Waveform> &interferers,
              const std::vector<double> &gains) {
  if (gains.size() != interferers.size())
    throw Error(Errc::kShapeMismatch, "one gain per interferer is required");
  std::size_t n = target.size();
  for (const auto &b : interferers) n = std::max(n, b.size());

  MixResult r;
  r.padded_target.samples = PadTo(target.samples, n);
  r.padded_target.sample_rate_hz = target.sample_rate_hz;
  r.padded_target.source_id = target.source_id;
  r.mixture = r.padded_target;
  for (std::size_t i = 0; i < interferers.size(); ++i) {
    const auto &b = interferers[i].samples;
    for (std::size_t t = 0; t < b.size(); ++t) r.mixture.samples[t] += gains[i] * b[t];
  }
  return r;
}

Manifest Simulate(const Corpus &corpus, const SimulationOptions &opts,
                  const fs::path &out_dir) {
  const auto k = static_cast<std::size_t>(opts.speakers_per_mix);
  std::vector<std::string> eligible;
  for (const auto &[speaker, entry] : corpus)
    if (entry.eligible_as_target()) eligible.push_back(speaker);
  if (corpus.size() < k)
    throw Error(Errc::kInsufficientSpeakers,
                std::to_string(corpus.size()) + " speakers for " + std::to_string(k) + "-speaker mixtures");
  if (eligible.size() < k)
    throw Error(Errc::kInsufficientUtterances,
                "only " + std::to_string(eligible.size()) + " speakers have two or more utterances");

  Manifest manifest;
  manifest.seed = opts.seed;
  manifest.corpus_fingerprint = CorpusFingerprint(corpus);
  manifest.base_dir = out_dir;
  manifest.entries.resize(opts.num_mixtures);
  if (opts.write_audio) {
    for (const char *sub : {"mix", "s1", "ref"}) fs::create_directories(out_dir / sub);
  }

  // Each entry depends only on (seed, index), so entries may be generated
  // in any order.
  for (std::size_t index = 0; index < opts.num_mixtures; ++index) {
    Rng rng(opts.seed, index);
    std::vector<std::string> pool = eligible;
    std::vector<std::string> speakers;
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t pick = static_cast<std::size_t>(rng.Index(pool.size()));
      speakers.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::vector<const Utterance *> utts;
    for (const auto &spk : speakers) {
      const auto &list = corpus.at(spk).utterances;
      utts.push_back(&list[rng.Index(list.size())]);
    }
    const auto &target_list = corpus.at(speakers[0]).utterances;
    std::vector<const Utterance *> others;
    for (const auto &u : target_list)
      if (u.id != utts[0]->id) others.push_back(&u);
    const Utterance *reference = others[rng.Index(others.size())];

    MixtureSpec spec;
    spec.target_speaker = speakers[0];
    spec.target_utt = utts[0]->id;
    spec.reference_utt = reference->id;
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%06zu", index);
    spec.id = std::string(prefix) + "_" + speakers[0] + "-" + utts[0]->id;
    for (std::size_t j = 1; j < k; ++j) {
      spec.interferer_speakers.push_back(speakers[j]);
      spec.interferer_utts.push_back(utts[j]->id);
      spec.snr_db.push_back(rng.Uniform(opts.snr_lo_db, opts.snr_hi_db));
      spec.id += "_" + speakers[j] + "-" + utts[j]->id;
    }
    spec.mixture_path = fs::path("mix") / (spec.id + ".wav");
    spec.target_path = fs::path("s1") / (spec.id + ".wav");
    spec.reference_path = fs::path("ref") / (spec.id + ".wav");

    Waveform target = LoadModelWav(utts[0]->path);
    std::vector<Waveform> interferers;
    std::size_t n = target.size();
    for (std::size_t j = 1; j < k; ++j) {
      interferers.push_back(LoadModelWav(utts[j]->path));
      n = std::max(n, interferers.back().size());
    }
    // SNR is measured over the padded length, so both powers share the
    // same denominator.
    Waveform padded_target = target;
    padded_target.samples = PadTo(target.samples, n);
    for (std::size_t j = 0; j + 1 < k; ++j) {
      Waveform padded = interferers[j];
      padded.samples = PadTo(padded.samples, n);
      spec.gains.push_back(SnrGain(padded_target, padded, spec.snr_db[j]));
    }

    if (opts.write_audio) {
      MixResult mixed = Mix(target, interferers, spec.gains);
      SaveWav(mixed.mixture, out_dir / spec.mixture_path);
      SaveWav(mixed.padded_target, out_dir / spec.target_path);
      SaveWav(LoadModelWav(reference->path), out_dir / spec.reference_path);
    }
    manifest.entries[index] = std::move(spec);
  }
  if (opts.write_audio) WriteManifest(manifest, out_dir / "manifest.jsonl");
  return manifest;
}

Manifest ExtendReferences(const Manifest &manifest, const Corpus &corpus, double seconds,
                          const fs::path &out_dir) {
  const auto wanted = static_cast<std::size_t>(std::llround(seconds * kModelSampleRate));
  if (wanted == 0) throw Error(Errc::kRangeError, "reference duration must be positive");
  char tag[32];
  std::snprintf(tag, sizeof tag, "ref_%gs", seconds);
  fs::create_directories(out_dir / tag);

  Manifest out = manifest;
  out.base_dir = out_dir;
  std::error_code ec;
  const bool same_base = fs::equivalent(manifest.base_dir, out_dir, ec);
  for (auto &spec : out.entries) {
    const auto &list = corpus.at(spec.target_speaker).utterances;
    std::vector<const Utterance *> order{&FindUtterance(corpus, spec.target_speaker, spec.reference_utt)};
    for (const auto &u : list)
      if (u.id != spec.target_utt && u.id != spec.reference_utt) order.push_back(&u);

    Waveform ref;
    ref.source_id = spec.id + "_ref";
    for (std::size_t i = 0; ref.size() < wanted; i = (i + 1) % order.size()) {
      Waveform piece = LoadModelWav(order[i]->path);
      ref.samples.insert(ref.samples.end(), piece.samples.begin(), piece.samples.end());
    }
    ref.samples.resize(wanted);
    spec.reference_path = fs::path(tag) / (spec.id + ".wav");
    SaveWav(ref, out_dir / spec.reference_path);
    if (!same_base) {
      spec.mixture_path = fs::absolute(manifest.Resolve(spec.mixture_path));
      spec.target_path = fs::absolute(manifest.Resolve(spec.target_path));
    }
  }
  return out;
}

std::string SerializeManifestLine(const MixtureSpec &spec) {
  std::string line = "{";
  line += "\"id\":" + Quote(spec.id);
  line += ",\"mixture_path\":" + Quote(spec.mixture_path.generic_string());
  line += ",\"target_path\":" + Quote(spec.target_path.generic_string());
  line += ",\"reference_path\":" + Quote(spec.reference_path.generic_string());
  line += ",\"target_speaker\":" + Quote(spec.target_speaker);
  line += ",\"interferer_speakers\":" + StringList(spec.interferer_speakers);
  line += ",\"snr_db\":" + NumberList(spec.snr_db);
  line += ",\"gains\":" + NumberList(spec.gains);
  return line + "}";
}

std::string SerializeManifest(const Manifest &manifest) {
  std::string out;
  for (const auto &spec : manifest.entries) out += SerializeManifestLine(spec) + "\n";
  return out;
}

void WriteManifest(const Manifest &manifest, const fs::path &path) {
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
    f << SerializeManifest(manifest);
  }
  json meta;
  meta["seed"] = manifest.seed;
  meta["corpus_fingerprint"] = manifest.corpus_fingerprint;
  json entries = json::array();
  for (const auto &spec : manifest.entries) {
    entries.push_back({{"id", spec.id},
                       {"target_utt", spec.target_utt},
                       {"interferer_utts", spec.interferer_utts},
                       {"reference_utt", spec.reference_utt}});
  }
  meta["entries"] = entries;
  fs::path meta_path = path;
  meta_path.replace_extension(".meta.json");
  std::ofstream f(meta_path, std::ios::binary);
  if (!f) throw Error(Errc::kIoError, "cannot write " + meta_path.string());
  f << meta.dump(1) << "\n";
}

Manifest ReadManifest(const fs::path &path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::kNotFound, path.string());
  Manifest manifest;
  manifest.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      MixtureSpec spec;
      spec.id = j.at("id").get<std::string>();
      spec.mixture_path = j.at("mixture_path").get<std::string>();
      spec.target_path = j.at("target_path").get<std::string>();
      spec.reference_path = j.at("reference_path").get<std::string>();
      spec.target_speaker = j.at("target_speaker").get<std::string>();
      spec.interferer_speakers = j.at("interferer_speakers").get<std::vector<std::string>>();
      const json &snr = j.at("snr_db");
      spec.snr_db = snr.is_array() ? snr.get<std::vector<double>>()
                                   : std::vector<double>{snr.get<double>()};
      spec.gains = j.at("gains").get<std::vector<double>>();
      manifest.entries.push_back(std::move(spec));
    } catch (const json::exception &e) {
      throw Error(Errc::kUnsupportedFormat,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }

  fs::path meta_path = path;
  meta_path.replace_extension(".meta.json");
  std::ifstream mf(meta_path);
  if (mf) {
    json meta = json::parse(mf, nullptr, false);
    if (!meta.is_discarded()) {
      manifest.seed = meta.value("seed", std::uint64_t{0});
      manifest.corpus_fingerprint = meta.value("corpus_fingerprint", std::string{});
      if (meta.contains("entries") && meta["entries"].size() == manifest.entries.size()) {
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
          const json &e = meta["entries"][i];
          auto &spec = manifest.entries[i];
          if (e.value("id", std::string{}) != spec.id) continue;
          spec.target_utt = e.value("target_utt", std::string{});
          spec.reference_utt = e.value("reference_utt", std::string{});
          spec.interferer_utts = e.value("interferer_utts", std::vector<std::string>{});
        }
      }
    }
  }
  return manifest;
}

}  // namespace spex
