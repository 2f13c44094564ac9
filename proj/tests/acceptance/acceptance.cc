// tests/acceptance/acceptance.cc

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

// Desk-scale acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <CLI11.hpp>

#include "spex/corpus_synth.h"
#include "spex/error.h"
#include "spex/mixsim.h"
#include "spex/model.h"
#include "spex/nn/grad_check.h"
#include "spex/nn/ops.h"
#include "spex/objectives.h"
#include "spex/trainer.h"

namespace fs = std::filesystem;
using spex::nn::Var;

namespace {

// Tolerances and sizes.
constexpr double kParamTarget = 10.8e6;
constexpr double kParamTolerance = 0.03;
constexpr std::size_t kFloorMixtures = 500;
constexpr std::size_t kFloorSpeakers = 20;
constexpr double kFloorLo = 1.5, kFloorHi = 3.5;
constexpr std::size_t kGradSamples = 800;
constexpr std::size_t kGradCoordinates = 240;
constexpr double kResolvedGradient = 1e-5;
constexpr double kGradTolerance = 1e-4;
constexpr std::size_t kOraclePairs = 1000;
constexpr double kOracleTolerance = 1e-9;
constexpr double kInvarianceTolerance = 1e-6;
constexpr std::size_t kOverfitMixtures = 20;
constexpr std::size_t kOverfitSpeakers = 4;
constexpr int kOverfitMaxEpochs = 300;
constexpr double kOverfitTarget = 5.0;
constexpr double kUniformLogitTolerance = 1e-10;
constexpr std::size_t kReceptiveField = 2041;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char *format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string ReadFile(const fs::path &p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<double> Gaussian(std::size_t n, spex::Rng &rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double &x : v) x = scale * rng.Normal();
  return v;
}

spex::Corpus SynthCorpus(const fs::path &dir, std::size_t speakers, std::size_t utts, double lo, double hi,
                         std::uint64_t seed) {
  spex::SynthCorpusOptions o;
  o.num_speakers = speakers;
  o.utterances_per_speaker = utts;
  o.min_seconds = lo;
  o.max_seconds = hi;
  o.seed = seed;
  return spex::WriteSynthCorpus(o, dir);
}

// 1
Outcome ParameterCount(const fs::path &) {
  spex::SpexModel model(spex::SpexConfig{});
  const double n = static_cast<double>(model.NumParameters());
  const double rel = std::abs(n - kParamTarget) / kParamTarget;
  return {rel <= kParamTolerance, Fmt("%zu parameters, %.2f%% from 10.8M (limit %.0f%%)", model.NumParameters(),
                                      100 * rel, 100 * kParamTolerance)};
}

// 2
Outcome MixtureFloor(const fs::path &work) {
  spex::Corpus corpus = SynthCorpus(work / "floor_corpus", kFloorSpeakers, 6, 2.0, 4.0, 21);
  spex::SimulationOptions o;
  o.num_mixtures = kFloorMixtures;
  o.snr_lo_db = 0.0;
  o.snr_hi_db = 5.0;
  o.seed = 22;
  spex::Manifest m = spex::Simulate(corpus, o, work / "floor_mix");
  double sum = 0.0;
  for (const auto &e : m.entries) {
    auto mix = spex::LoadWav(m.Resolve(e.mixture_path));
    auto tgt = spex::LoadWav(m.Resolve(e.target_path));
    sum += spex::SiSdr(mix.samples, tgt.samples);
  }
  const double mean = sum / static_cast<double>(m.entries.size());
  return {mean >= kFloorLo && mean <= kFloorHi,
          Fmt("mean mixture SI-SDR %.3f dB over %zu mixtures from %zu speakers (window [%.1f, %.1f])",
              mean, m.entries.size(), corpus.size(), kFloorLo, kFloorHi)};
}

// 3
Outcome GradientFidelity(const fs::path &work) {
  spex::SpexConfig c = spex::MicroConfig();
  spex::SpexModel model(c, 31);
  spex::Corpus corpus = SynthCorpus(work / "grad_corpus", 4, 2, 0.5, 0.6, 32);
  std::vector<Var> refs;
  std::vector<double> mix, target;
  spex::Rng rng(33);
  std::vector<int> labels;
  int label = 0;
  for (const auto &[speaker, utts] : corpus) {
    if (refs.size() == 2) break;
    auto ref = spex::LoadWav(utts.utterances[0].path);
    refs.push_back(spex::FeatureTensor(spex::SpeakerFeatures(ref, c.features)));
    auto speech = spex::LoadWav(utts.utterances[1].path).samples;
    // Skip the leading pause so the target window carries speech.
    std::vector<double> clean(speech.begin() + 2000, speech.begin() + 2000 + kGradSamples);
    for (std::size_t i = 0; i < kGradSamples; ++i) {
      target.push_back(clean[i]);
      mix.push_back(clean[i] + 0.05 * rng.Normal());
    }
    labels.push_back(label++);
  }
  Var mixture = Var::Constant({2, 1, kGradSamples}, mix);
  Var tgt = Var::Constant({2, 1, kGradSamples}, target);
  spex::nn::GradCheckOptions opts;
  opts.num_coordinates = kGradCoordinates;
  opts.seed = 34;
  auto loss = [&] { return spex::SpexLoss(model.Forward(mixture, refs), tgt, labels, c).total; };
  auto r = spex::nn::GradCheck(loss, model.ParameterVars(), opts);
  // Diagnostic only: coordinates large enough that cancellation in J does
  // not dominate the central difference.
  double resolved = 0.0;
  std::size_t small = 0;
  for (const auto &k : r.coordinates) {
    if (std::max(std::abs(k.analytic), std::abs(k.numeric)) >= kResolvedGradient)
      resolved = std::max(resolved, k.relative_error);
    else
      ++small;
  }
  return {r.max_relative_error < kGradTolerance && r.coordinates_checked >= 200,
          Fmt("max relative error %.3g (analytic %.6g, numeric %.6g) over %zu coordinates, %zu nudged off kinks, "
              "T=%zu; %zu coordinates with |g| < %.0e, max error %.3g over the rest",
              r.max_relative_error, r.worst_analytic, r.worst_numeric, r.coordinates_checked, r.nudged,
              kGradSamples, small, kResolvedGradient, resolved)};
}

// SI-SDR written out directly with long double accumulation.
double BruteForceSiSdr(const std::vector<double> &est, const std::vector<double> &ref) {
  const std::size_t n = ref.size();
  long double me = 0, mr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    me += est[i];
    mr += ref[i];
  }
  me /= n;
  mr /= n;
  long double dot = 0, rr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += (est[i] - me) * (ref[i] - mr);
    rr += (ref[i] - mr) * (ref[i] - mr);
  }
  long double target_energy = 0, error_energy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double st = dot / rr * (ref[i] - mr);
    const long double e = (est[i] - me) - st;
    target_energy += st * st;
    error_energy += e * e;
  }
  return static_cast<double>(10.0L * std::log10(target_energy / (error_energy + spex::kSiSdrEps)));
}

// 4
Outcome SiSdrOracle(const fs::path &) {
  spex::Rng rng(41);
  double worst = 0.0, worst_inv = 0.0;
  for (std::size_t k = 0; k < kOraclePairs; ++k) {
    const std::size_t n = 256 + rng.Index(4000);
    auto ref = Gaussian(n, rng, rng.Uniform(0.1, 2.0));
    auto noise = Gaussian(n, rng, rng.Uniform(0.1, 2.0));
    const double mix = rng.Uniform(-2.0, 2.0), offset = rng.Uniform(-1.0, 1.0);
    std::vector<double> est(n);
    for (std::size_t i = 0; i < n; ++i) est[i] = mix * ref[i] + noise[i] + offset;
    const double got = spex::SiSdr(est, ref);
    worst = std::max(worst, std::abs(got - BruteForceSiSdr(est, ref)));

    // The absolute eps shifts the value by about 4.34 eps |1 - 1/c^2| / |e|^2 dB
    // under scaling by c, so gains well below one are excluded.
    const double scale = rng.Uniform(0.5, 10.0) * (rng.Uniform() < 0.5 ? -1.0 : 1.0);
    const double shift = rng.Uniform(-5.0, 5.0);
    auto scaled = est, shifted = est;
    for (double &v : scaled) v *= scale;
    for (double &v : shifted) v += shift;
    worst_inv = std::max({worst_inv, std::abs(spex::SiSdr(scaled, ref) - got),
                          std::abs(spex::SiSdr(shifted, ref) - got)});
  }
  return {worst <= kOracleTolerance && worst_inv <= kInvarianceTolerance,
          Fmt("%zu pairs: max |si_sdr - oracle| %.3g dB, max invariance drift %.3g dB", kOraclePairs, worst,
              worst_inv)};
}

// 5
Outcome Overfit(const fs::path &work) {
  spex::Corpus corpus = SynthCorpus(work / "overfit_corpus", kOverfitSpeakers, 5, 1.0, 2.0, 51);
  spex::SimulationOptions o;
  o.num_mixtures = kOverfitMixtures;
  o.seed = 52;
  spex::Manifest m = spex::Simulate(corpus, o, work / "overfit_mix");
  spex::SpexConfig c = spex::MicroConfig();
  spex::SpexModel model(c, 53);
  const auto speakers = spex::BuildSpeakerIndex(m);
  auto items = spex::UtteranceItems(m, c.features, speakers);
  spex::TrainConfig t;
  t.max_epochs = kOverfitMaxEpochs;
  t.batch_size = 1;
  t.seed = 54;
  t.lr0 = 2e-3;
  t.segment_seconds = 1.0;
  const auto before = spex::Evaluate(m, spex::ModelExtractor(model));
  spex::TrainHooks hooks;
  hooks.on_epoch = [](const spex::EpochRecord &r) {
    if (r.epoch % 10 == 0)
      std::fprintf(stderr, "  overfit epoch %d train %.4f dev %.4f lr %.2g (%.1f s)\n", r.epoch, r.train_loss,
                   r.dev_loss, r.lr, r.seconds);
  };
  auto result = spex::Train(model, items, items, t, hooks);
  const auto after = spex::Evaluate(m, spex::ModelExtractor(model));
  return {!result.aborted && after.mean_s1.si_sdri >= kOverfitTarget,
          Fmt("mean training s1 SI-SDRi %.2f dB after %zu epochs (best %d; %.2f dB before training; target %.1f)",
              after.mean_s1.si_sdri, result.history.size(), result.best_epoch, before.mean_s1.si_sdri,
              kOverfitTarget)};
}

// 6
Outcome LossAlgebra(const fs::path &) {
  spex::SpexConfig c = spex::MicroConfig();
  spex::Rng rng(61);
  spex::SpexModel model(c, 62);
  Var mixture = Var::Constant({3, 1, 600}, Gaussian(1800, rng, 0.3));
  Var target = Var::Constant({3, 1, 600}, Gaussian(1800, rng, 0.3));
  std::vector<Var> refs;
  for (int i = 0; i < 3; ++i) refs.push_back(Var::Constant({1, 60, 40}, Gaussian(2400, rng)));
  std::vector<int> labels = {0, 3, 1};
  auto f = model.Forward(mixture, refs);

  const double j1_zero = spex::MultiScaleLoss(f.extraction, target, 0.0, 0.0).item();
  const double rho1 = spex::nn::Mean(spex::nn::SiSdr(f.extraction.s1, target)).item();
  const bool j1_ok = j1_zero == -rho1;
  spex::SpexConfig g0 = c, g1 = c;
  g0.gamma = 0.0;
  g1.gamma = 1.0;
  auto l0 = spex::SpexLoss(f, target, labels, g0);
  auto l1 = spex::SpexLoss(f, target, labels, g1);
  const bool gamma_ok = l0.values.total == l0.values.j1 && l1.values.total == l1.values.j2;
  Var uniform = Var::Constant({4, 101, 1}, 0.37);
  std::vector<int> ul = {0, 17, 64, 100};
  const double ce = spex::SpeakerCrossEntropy(uniform, ul).item();
  const double ce_err = std::abs(ce - std::log(101.0));
  return {j1_ok && gamma_ok && ce_err <= kUniformLogitTolerance,
          Fmt("alpha=beta=0 J1 == -rho(s1): %s; gamma=0 J == J1 and gamma=1 J == J2: %s; "
              "|J2(uniform, 101) - ln 101| = %.3g",
              j1_ok ? "exact" : "differs", gamma_ok ? "exact" : "differs", ce_err)};
}

std::size_t EnumeratedReceptiveField(const spex::SpexConfig &c) {
  std::set<long> reach = {0};
  for (std::size_t r = 0; r < c.R; ++r)
    for (std::size_t b = 0; b < c.B; ++b) {
      std::set<long> next;
      const long d = 1L << b, half = static_cast<long>(c.Q / 2);
      for (long x : reach)
        for (long k = -half; k <= half; ++k) next.insert(x + k * d);
      reach.swap(next);
    }
  return reach.size();
}

// 7
Outcome ShapeSuite(const fs::path &) {
  spex::Rng rng(71);
  spex::SpexConfig full;
  spex::SpexModel big(full, 72);
  std::size_t k_checks = 0, k_fail = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t T = full.L1 + full.stride() * (15 + rng.Index(600));
    auto e = big.SpeechEncode(Var::Constant({1, 1, T}, Gaussian(T, rng, 0.3)));
    const std::size_t want = 2 * (T - full.L1) / full.L1 + 1;
    for (const Var *v : {&e.e1, &e.e2, &e.e3}) {
      ++k_checks;
      if (v->shape().frames != want) ++k_fail;
    }
  }
  const std::size_t field = big.ReceptiveField();
  const std::size_t enumerated = EnumeratedReceptiveField(full);

  spex::SpexModel micro(spex::MicroConfig(), 73);
  std::size_t mask_fail = 0, length_fail = 0, runs = 0;
  auto check = [&](const spex::SpexModel &m, std::size_t T) {
    const std::size_t frames = 1 + rng.Index(80);
    auto f = m.Forward(Var::Constant({1, 1, T}, Gaussian(T, rng, rng.Uniform(0.01, 3.0))),
                       {Var::Constant({1, 60, frames}, Gaussian(60 * frames, rng))});
    ++runs;
    for (const Var *mask : {&f.masks.m1, &f.masks.m2, &f.masks.m3})
      for (double v : mask->value())
        if (!(v >= 0.0 && v <= 1.0)) ++mask_fail;
    for (const Var *s : {&f.extraction.s1, &f.extraction.s2, &f.extraction.s3, &f.extraction.sw})
      if (s->shape().frames != T) ++length_fail;
  };
  for (int trial = 0; trial < 30; ++trial) check(micro, 160 + rng.Index(3000));
  check(big, 1203);
  const bool ok = k_fail == 0 && field == kReceptiveField && enumerated == kReceptiveField && mask_fail == 0 &&
                  length_fail == 0;
  return {ok, Fmt("K formula %zu/%zu; receptive field %zu (enumerated %zu, expected %zu); %zu forwards: "
                  "%zu mask values outside [0,1], %zu length mismatches",
                  k_checks - k_fail, k_checks, field, enumerated, kReceptiveField, runs, mask_fail, length_fail)};
}

// 8
Outcome Determinism(const fs::path &work) {
  spex::Corpus corpus = SynthCorpus(work / "det_corpus", 4, 3, 1.0, 1.5, 81);
  spex::SimulationOptions o;
  o.num_mixtures = 6;
  o.seed = 82;
  spex::Simulate(corpus, o, work / "det_a");
  spex::Manifest m = spex::Simulate(corpus, o, work / "det_b");
  const bool manifests = ReadFile(work / "det_a" / "manifest.jsonl") == ReadFile(work / "det_b" / "manifest.jsonl") &&
                         !ReadFile(work / "det_a" / "manifest.jsonl").empty();
  spex::SpexConfig c = spex::MicroConfig();
  const auto speakers = spex::BuildSpeakerIndex(m);
  spex::TrainConfig t;
  t.segment_seconds = 0.5;
  t.max_epochs = 1;
  t.seed = 83;
  auto run = [&] {
    spex::SpexModel model(c, 84);
    auto items = spex::SegmentManifest(m, t.segment_seconds, c.features, speakers);
    return spex::Train(model, items, items, t).history.at(0);
  };
  const auto a = run(), b = run();
  const bool losses = a.train_loss == b.train_loss && a.dev_loss == b.dev_loss;
  return {manifests && losses, Fmt("manifests byte-identical: %s; epoch-1 train loss %.17g vs %.17g, dev %.17g vs %.17g",
                                   manifests ? "yes" : "no", a.train_loss, b.train_loss, a.dev_loss, b.dev_loss)};
}

// 9
Outcome Scheduler(const fs::path &) {
  struct Case {
    std::vector<double> trace;
    std::vector<int> halves;
    int stop;
  };
  std::vector<double> flat(25, 3.0);
  std::vector<double> late = {9, 8, 7, 6};
  for (int i = 0; i < 15; ++i) late.push_back(6.5 + 0.01 * i);
  const std::vector<Case> cases = {
      {flat, {3, 6, 9}, 10},
      {{5, 4, 4.1, 4.2, 4.3}, {4}, -1},
      {late, {6, 9, 12}, 13},
      {{5, 6, 7, 4, 6, 7, 3, 6, 7, 2}, {}, -1},
  };
  int failures = 0;
  std::string detail;
  for (const auto &cs : cases) {
    spex::PlateauScheduler s(1e-3, 3, 10);
    std::vector<int> halves;
    int stop = -1;
    for (int e = 0; e < static_cast<int>(cs.trace.size()); ++e) {
      auto d = s.Observe(cs.trace[e]);
      if (d.halved) halves.push_back(e);
      if (d.stop) {
        stop = e;
        break;
      }
    }
    const double want_lr = 1e-3 / std::pow(2.0, static_cast<double>(cs.halves.size()));
    if (halves != cs.halves || stop != cs.stop || s.lr() != want_lr) ++failures;
  }
  return {failures == 0, Fmt("%zu traces, %d mismatched (halve after 3 non-improving epochs, stop after 10)",
                             cases.size(), failures)};
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Acceptance checks", "spex_acceptance"};
  std::vector<int> only;
  std::string workdir;
  bool keep = false;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = workdir.empty() ? fs::temp_directory_path() / ("spex_acceptance_" + std::to_string(getpid()))
                                        : fs::path(workdir);
  fs::create_directories(work);

  const std::vector<std::pair<const char *, std::function<Outcome(const fs::path &)>>> criteria = {
      {"parameter count", ParameterCount},   {"mixture floor", MixtureFloor},
      {"gradient fidelity", GradientFidelity}, {"SI-SDR oracle", SiSdrOracle},
      {"overfit", Overfit},                  {"loss algebra", LossAlgebra},
      {"shapes and receptive field", ShapeSuite}, {"determinism", Determinism},
      {"scheduler", Scheduler},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second(work);
    } catch (const std::exception &e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %d %s: %s (%.1f s)\n", r.pass ? "PASS" : "FAIL", id, criteria[i].first, r.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !r.pass;
  }
  if (!keep) fs::remove_all(work);
  std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
  return failed ? 1 : 0;
}
