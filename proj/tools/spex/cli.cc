// tools/spex/cli.cc

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

#include "cli.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "spex/checkpoint.h"
#include "spex/config.h"
#include "spex/error.h"
#include "spex/mixsim.h"
#include "spex/trainer.h"

namespace spex::cli {
namespace {

namespace fs = std::filesystem;

bool IsConfigKey(const std::string &key) {
  return key.rfind("model.", 0) == 0 || key.rfind("train.", 0) == 0 || key == "alpha" || key == "beta" ||
         key == "gamma";
}

// Pulls `--model.X v`, `--train.X v`, `--alpha v` (or `--key=v`) out of args.
std::vector<ConfigOverride> TakeOverrides(std::vector<std::string> &args) {
  std::vector<ConfigOverride> overrides;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string &a = args[i];
    if (a.rfind("--", 0) == 0) {
      std::string key = a.substr(2);
      std::optional<std::string> value;
      if (auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key = key.substr(0, eq);
      }
      if (IsConfigKey(key)) {
        if (!value) {
          if (i + 1 >= args.size()) throw CLI::ArgumentMismatch(a + " requires a value");
          value = args[++i];
        }
        overrides.emplace_back(key, *value);
        continue;
      }
    }
    rest.push_back(a);
  }
  args = std::move(rest);
  return overrides;
}

std::pair<double, double> ParseRange(const std::string &text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) throw CLI::ValidationError("--snr", "expected lo:hi, got " + text);
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception &) {
    throw CLI::ValidationError("--snr", "expected lo:hi, got " + text);
  }
}

void LogConfig(std::ostream &err, const CliConfig &config) {
  err << "spex: seed " << config.seed << "\n" << "spex: config " << ConfigToJson(config) << "\n";
}

void LogModel(std::ostream &err, const SpexModel &model) {
  err << "spex: model " << ModelConfigToJson(model.config()) << " (" << model.NumParameters()
      << " parameters)\n";
}

struct Options {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  // simulate
  std::string corpus, out_dir, snr = "0:5";
  std::size_t n = 0;
  int speakers = 2;
  double reference_seconds = 0.0;
  // train
  std::string train_manifest, dev_manifest, init;
  // extract / evaluate
  std::string model, mixture, reference, out_wav, manifest, report;
  bool emit_all_scales = false;
};

CliConfig Resolve(const Options &o, std::vector<ConfigOverride> overrides) {
  if (o.seed) overrides.emplace_back("seed", std::to_string(*o.seed));
  std::optional<fs::path> file;
  if (!o.config_file.empty()) file = o.config_file;
  return ParseConfig(file, overrides);
}

int Simulate(const Options &o, const std::vector<ConfigOverride> &overrides, std::ostream &out,
             std::ostream &err) {
  if (!overrides.empty()) throw Error(Errc::kUnknownKey, overrides.front().first + " does not apply to simulate");
  const CliConfig config = Resolve(o, {});
  LogConfig(err, config);
  const auto [lo, hi] = ParseRange(o.snr);
  SimulationOptions opts;
  opts.num_mixtures = o.n;
  opts.speakers_per_mix = o.speakers;
  opts.snr_lo_db = lo;
  opts.snr_hi_db = hi;
  opts.seed = config.seed;
  const Corpus corpus = ScanCorpus(o.corpus);
  Manifest m = Simulate(corpus, opts, o.out_dir);
  if (o.reference_seconds > 0) {
    m = ExtendReferences(m, corpus, o.reference_seconds, o.out_dir);
    char name[64];
    std::snprintf(name, sizeof name, "manifest_ref_%gs.jsonl", o.reference_seconds);
    WriteManifest(m, fs::path(o.out_dir) / name);
  }
  out << "wrote " << m.entries.size() << " mixtures to " << o.out_dir << "\n";
  return kExitOk;
}

int Train(const Options &o, const std::vector<ConfigOverride> &overrides, std::ostream &out, std::ostream &err) {
  const CliConfig config = Resolve(o, overrides);
  LogConfig(err, config);
  const Manifest train_manifest = ReadManifest(o.train_manifest);
  const Manifest dev_manifest = ReadManifest(o.dev_manifest);
  const SpeakerIndex speakers = BuildSpeakerIndex(train_manifest);
  if (speakers.size() > config.model.n_speakers)
    throw Error(Errc::kRangeError, "training set has " + std::to_string(speakers.size()) +
                                       " speakers but model.n_speakers = " +
                                       std::to_string(config.model.n_speakers));

  SpexModel model = o.init.empty() ? SpexModel(config.model, config.seed) : LoadCheckpoint(o.init);
  LogModel(err, model);
  const auto &features = model.config().features;
  auto train_items = SegmentManifest(train_manifest, config.train.segment_seconds, features, speakers);
  auto dev_items = config.train.full_utterance_dev
                       ? UtteranceItems(dev_manifest, features, speakers)
                       : SegmentManifest(dev_manifest, config.train.segment_seconds, features, speakers);
  err << "spex: " << train_items.size() << " training and " << dev_items.size() << " dev segments\n";

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "config.json");
    f << ConfigToJson(config) << "\n";
  }
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord &r) {
    err << "epoch " << r.epoch << " train " << r.train_loss << " dev " << r.dev_loss << " lr " << r.lr << " ("
        << r.seconds << " s)\n";
  };
  hooks.on_best = [&](const SpexModel &m, const EpochRecord &) { SaveCheckpoint(m, dir / "best.ckpt"); };
  const TrainResult result = spex::Train(model, train_items, dev_items, config.train, hooks);
  WriteHistory(result.history, dir / "history.jsonl");
  if (result.best_epoch >= 0) SaveCheckpoint(model, dir / "best.ckpt");
  if (result.aborted) throw Error(Errc::kNonFiniteLoss, result.abort_message);
  out << "best epoch " << result.best_epoch << " dev loss " << result.best_dev_loss << "\n";
  return kExitOk;
}

int Extract(const Options &o, const std::vector<ConfigOverride> &overrides, std::ostream &out,
            std::ostream &err) {
  if (!overrides.empty()) throw Error(Errc::kUnknownKey, overrides.front().first + " does not apply to extract");
  const SpexModel model = LoadCheckpoint(o.model);
  LogModel(err, model);
  const ExtractionOutputs s = ExtractWithModel(model, LoadWav(o.mixture), LoadWav(o.reference));
  auto save = [&](const std::vector<double> &x, const fs::path &path) {
    Waveform w;
    w.samples = x;
    SaveWav(w, path);
    out << "wrote " << path.string() << "\n";
  };
  const fs::path path = o.out_wav;
  save(s.s1, path);
  if (o.emit_all_scales) {
    auto sibling = [&](const std::string &tag) {
      return path.parent_path() / (path.stem().string() + "_" + tag + path.extension().string());
    };
    save(s.s2, sibling("s2"));
    save(s.s3, sibling("s3"));
    save(s.sw, sibling("sw"));
  }
  return kExitOk;
}

int EvaluateCmd(const Options &o, const std::vector<ConfigOverride> &overrides, std::ostream &out,
                std::ostream &err) {
  if (!overrides.empty()) throw Error(Errc::kUnknownKey, overrides.front().first + " does not apply to evaluate");
  const SpexModel model = LoadCheckpoint(o.model);
  LogModel(err, model);
  const EvaluationReport report = Evaluate(ReadManifest(o.manifest), ModelExtractor(model));
  const std::string json = ReportToJson(report);
  if (!o.report.empty()) {
    std::ofstream f(o.report, std::ios::binary);
    if (!f) throw Error(Errc::kIoError, "cannot write " + o.report);
    f << json;
  }
  out << "utterances " << report.utterances.size() << " mixture SI-SDR " << report.mean_mixture_si_sdr
      << " dB, s1 SI-SDRi " << report.mean_s1.si_sdri << " dB\n";
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string> &argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Time-domain target speaker extraction", "spex"};
  app.require_subcommand(1);
  Options o;

  auto *sim = app.add_subcommand("simulate", "Simulate mixtures from a speaker corpus");
  sim->add_option("--corpus", o.corpus, "Corpus directory (one subdirectory per speaker)")->required();
  sim->add_option("--out", o.out_dir, "Output directory")->required();
  sim->add_option("--n", o.n, "Number of mixtures")->required();
  sim->add_option("--speakers", o.speakers, "Speakers per mixture")->check(CLI::IsMember({2, 3}));
  sim->add_option("--snr", o.snr, "Interferer SNR range lo:hi in dB");
  sim->add_option("--reference-seconds", o.reference_seconds, "Extend references to this duration");

  auto *train = app.add_subcommand("train", "Train a model");
  train->add_option("--train", o.train_manifest, "Training manifest")->required();
  train->add_option("--dev", o.dev_manifest, "Development manifest")->required();
  train->add_option("--out", o.out_dir, "Output directory for checkpoints and history")->required();
  train->add_option("--init", o.init, "Start from this checkpoint");

  auto *extract = app.add_subcommand("extract", "Extract the target speaker from a mixture");
  extract->add_option("--model", o.model, "Checkpoint")->required();
  extract->add_option("--mixture", o.mixture, "Mixture WAV")->required();
  extract->add_option("--reference", o.reference, "Reference WAV of the target speaker")->required();
  extract->add_option("--out", o.out_wav, "Output WAV")->required();
  extract->add_flag("--emit-all-scales", o.emit_all_scales, "Also write the s2, s3 and weighted outputs");

  auto *evaluate = app.add_subcommand("evaluate", "Score a model on a manifest");
  evaluate->add_option("--model", o.model, "Checkpoint")->required();
  evaluate->add_option("--manifest", o.manifest, "Manifest to score")->required();
  evaluate->add_option("--report", o.report, "Write a JSON report here");

  for (auto *cmd : {sim, train}) {
    cmd->add_option("--config", o.config_file, "JSON config file");
    cmd->add_option("--seed", o.seed, "Random seed (falls back to SPEX_SEED)");
  }

  std::vector<std::string> args = argv;
  std::vector<ConfigOverride> overrides;
  try {
    overrides = TakeOverrides(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    err << "spex: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*sim) return Simulate(o, overrides, out, err);
    if (*train) return Train(o, overrides, out, err);
    if (*extract) return Extract(o, overrides, out, err);
    return EvaluateCmd(o, overrides, out, err);
  } catch (const Error &e) {
    err << "spex: " << e.what() << "\n";
    return kExitDomainError;
  } catch (const std::exception &e) {
    err << "spex: " << e.what() << "\n";
    return kExitDomainError;
  }
}

}  // namespace spex::cli
