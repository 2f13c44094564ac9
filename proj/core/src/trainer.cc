// core/src/trainer.cc

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

#include "spex/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spex/error.h"
#include "spex/features.h"
#include "spex/rng.h"

namespace spex {
namespace {

using nn::Var;

Waveform LoadChecked(const std::filesystem::path &path) {
  Waveform w = LoadWav(path);
  RequireModelRate(w);
  return w;
}

int LabelFor(const SpeakerIndex &speakers, const std::string &speaker) {
  auto it = speakers.find(speaker);
  return it == speakers.end() ? -1 : it->second;
}

// Consecutive runs of equal-length items, at most batch_size long.
std::vector<std::vector<std::size_t>> MakeBatches(const std::vector<TrainingSegment> &items,
                                                  const std::vector<std::size_t> &order, int batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t idx : order) {
    if (batches.empty() || batches.back().size() >= static_cast<std::size_t>(batch_size) ||
        items[batches.back().front()].mixture.size() != items[idx].mixture.size()) {
      batches.emplace_back();
    }
    batches.back().push_back(idx);
  }
  return batches;
}

struct BatchTensors {
  Var mixture;
  Var target;
  std::vector<Var> references;
  std::vector<int> labels;
};

BatchTensors Assemble(const std::vector<TrainingSegment> &items, const std::vector<std::size_t> &batch) {
  const std::size_t T = items[batch.front()].mixture.size();
  std::vector<double> mix, tgt;
  mix.reserve(batch.size() * T);
  tgt.reserve(batch.size() * T);
  BatchTensors out;
  for (std::size_t idx : batch) {
    const TrainingSegment &s = items[idx];
    mix.insert(mix.end(), s.mixture.begin(), s.mixture.end());
    tgt.insert(tgt.end(), s.target.begin(), s.target.end());
    out.references.push_back(s.reference);
    out.labels.push_back(s.speaker_label);
  }
  out.mixture = Var::Constant({batch.size(), 1, T}, std::move(mix));
  out.target = Var::Constant({batch.size(), 1, T}, std::move(tgt));
  return out;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void TrainConfig::Validate(const SpexConfig &model) const {
  auto require = [](bool ok, const std::string &what) {
    if (!ok) throw Error(Errc::kRangeError, what);
  };
  require(lr0 > 0, "lr0 must be positive");
  require(lr_halve_patience_epochs > 0 && early_stop_patience_epochs > 0, "patience values must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(max_epochs > 0, "max_epochs must be positive");
  require(segment_seconds * kModelSampleRate >= static_cast<double>(model.L3),
          "segment_seconds x 8000 must be at least L3");
  require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0,
          "invalid Adam hyperparameters");
}

SpeakerIndex BuildSpeakerIndex(const Manifest &manifest) {
  SpeakerIndex index;
  for (const auto &e : manifest.entries) index.emplace(e.target_speaker, 0);
  int next = 0;
  for (auto &[speaker, label] : index) label = next++;
  return index;
}

std::vector<TrainingSegment> SegmentManifest(const Manifest &manifest, double segment_seconds,
                                             const FeatureOptions &features, const SpeakerIndex &speakers) {
  const auto window = static_cast<std::size_t>(std::llround(segment_seconds * kModelSampleRate));
  if (window == 0) throw Error(Errc::kRangeError, "segment length must be positive");
  std::vector<TrainingSegment> out;
  for (const auto &entry : manifest.entries) {
    Waveform mixture = LoadChecked(manifest.Resolve(entry.mixture_path));
    Waveform target = LoadChecked(manifest.Resolve(entry.target_path));
    if (mixture.size() != target.size())
      throw Error(Errc::kShapeMismatch, entry.id + ": mixture and target lengths differ");
    Var reference;
    const std::size_t count = mixture.size() / window;
    for (std::size_t k = 0; k < count; ++k) {
      auto begin = static_cast<std::ptrdiff_t>(k * window);
      auto end = begin + static_cast<std::ptrdiff_t>(window);
      std::vector<double> tgt(target.samples.begin() + begin, target.samples.begin() + end);
      if (RmsPower(tgt) < kSilenceFloor) continue;
      if (!reference.defined())
        reference = FeatureTensor(SpeakerFeatures(LoadChecked(manifest.Resolve(entry.reference_path)), features));
      TrainingSegment seg;
      seg.entry_id = entry.id;
      seg.mixture.assign(mixture.samples.begin() + begin, mixture.samples.begin() + end);
      seg.target = std::move(tgt);
      seg.reference = reference;
      seg.speaker_label = LabelFor(speakers, entry.target_speaker);
      out.push_back(std::move(seg));
    }
  }
  if (out.empty())
    throw Error(Errc::kEmptyAfterSegmentation,
                "no " + std::to_string(segment_seconds) + " s segments with target speech");
  return out;
}

std::vector<TrainingSegment> UtteranceItems(const Manifest &manifest, const FeatureOptions &features,
                                            const SpeakerIndex &speakers) {
  std::vector<TrainingSegment> out;
  for (const auto &entry : manifest.entries) {
    TrainingSegment seg;
    seg.entry_id = entry.id;
    seg.mixture = LoadChecked(manifest.Resolve(entry.mixture_path)).samples;
    seg.target = LoadChecked(manifest.Resolve(entry.target_path)).samples;
    seg.reference = FeatureTensor(SpeakerFeatures(LoadChecked(manifest.Resolve(entry.reference_path)), features));
    seg.speaker_label = LabelFor(speakers, entry.target_speaker);
    out.push_back(std::move(seg));
  }
  if (out.empty()) throw Error(Errc::kEmptyAfterSegmentation, "manifest has no entries");
  return out;
}

PlateauScheduler::PlateauScheduler(double lr0, int halve_patience, int stop_patience, bool strict_increase)
    : lr_(lr0), halve_patience_(halve_patience), stop_patience_(stop_patience),
      strict_increase_(strict_increase) {}

PlateauScheduler::Decision PlateauScheduler::Observe(double dev_loss) {
  ++epoch_;
  Decision d;
  const bool first = best_epoch_ < 0;
  if (first || dev_loss < best_loss_) {
    best_loss_ = dev_loss;
    best_epoch_ = epoch_;
    d.improved = true;
  }
  const bool bad = strict_increase_ ? (!first && dev_loss > previous_loss_) : !d.improved;
  previous_loss_ = dev_loss;
  if (bad) {
    ++bad_epochs_;
    ++since_halving_;
  } else {
    bad_epochs_ = 0;
    since_halving_ = 0;
  }
  if (since_halving_ >= halve_patience_) {
    lr_ /= 2.0;
    since_halving_ = 0;
    d.halved = true;
  }
  d.stop = bad_epochs_ >= stop_patience_;
  d.lr = lr_;
  return d;
}

Adam::Adam(std::vector<Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto &p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::ZeroGrad() {
  for (auto &p : params_) p.ZeroGrad();
}

double Adam::ClipGradNorm(double max_norm) {
  double sq = 0.0;
  for (const auto &p : params_)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto &p : params_)
      for (double &g : p.mutable_grad()) g *= s;
  }
  return norm;
}

void Adam::Step(double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto &value = params_[i].mutable_value();
    const auto grad = params_[i].grad();
    if (grad.empty()) continue;
    auto &m = m_[i];
    auto &v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad[j] * grad[j];
      value[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

std::vector<std::size_t> EpochOrder(std::size_t count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, static_cast<std::uint64_t>(epoch));
  rng.Shuffle(order);
  return order;
}

double DevLoss(const SpexModel &model, const std::vector<TrainingSegment> &items, int batch_size) {
  nn::NoGradGuard no_grad;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto &batch : MakeBatches(items, order, batch_size)) {
    BatchTensors t = Assemble(items, batch);
    ForwardResult f = model.Forward(t.mixture, t.references);
    sum += SpexLoss(f, t.target, t.labels, model.config()).values.total * static_cast<double>(batch.size());
    n += batch.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

TrainResult Train(SpexModel &model, const std::vector<TrainingSegment> &train,
                  const std::vector<TrainingSegment> &dev, const TrainConfig &cfg, const TrainHooks &hooks) {
  cfg.Validate(model.config());
  if (train.empty()) throw Error(Errc::kEmptyAfterSegmentation, "no training segments");
  for (const auto &s : train)
    if (s.speaker_label >= static_cast<int>(model.config().n_speakers))
      throw Error(Errc::kIndexOutOfRange, "speaker label " + std::to_string(s.speaker_label) +
                                              " exceeds n_speakers = " + std::to_string(model.config().n_speakers));
  const std::vector<TrainingSegment> &dev_items = dev.empty() ? train : dev;

  Adam adam(model.ParameterVars(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  PlateauScheduler schedule(cfg.lr0, cfg.lr_halve_patience_epochs, cfg.early_stop_patience_epochs,
                            cfg.strict_increase);
  TrainResult result;
  auto best = model.SnapshotValues();

  auto abort = [&](const std::string &why) {
    result.aborted = true;
    result.abort_message = why;
    model.RestoreValues(best);
    return result;
  };

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = schedule.lr();
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (const auto &batch : MakeBatches(train, EpochOrder(train.size(), cfg.seed, epoch), cfg.batch_size)) {
      BatchTensors t = Assemble(train, batch);
      adam.ZeroGrad();
      ForwardResult f = model.Forward(t.mixture, t.references);
      LossTerms loss = SpexLoss(f, t.target, t.labels, model.config());
      if (!std::isfinite(loss.values.total))
        return abort("non-finite training loss at epoch " + std::to_string(epoch));
      nn::Backward(loss.total);
      const double norm = adam.ClipGradNorm(cfg.grad_clip_norm);
      if (!std::isfinite(norm)) return abort("non-finite gradient at epoch " + std::to_string(epoch));
      adam.Step(lr);
      loss_sum += loss.values.total * static_cast<double>(batch.size());
      count += batch.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(count);
    rec.dev_loss = DevLoss(model, dev_items, cfg.batch_size);
    rec.lr = lr;
    rec.seconds = Seconds(start);
    if (!std::isfinite(rec.dev_loss)) return abort("non-finite dev loss at epoch " + std::to_string(epoch));
    result.history.push_back(rec);

    const auto decision = schedule.Observe(rec.dev_loss);
    if (decision.improved) {
      best = model.SnapshotValues();
      result.best_epoch = epoch;
      result.best_dev_loss = rec.dev_loss;
      if (hooks.on_best) hooks.on_best(model, rec);
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (decision.stop) break;
  }
  model.RestoreValues(best);
  return result;
}

std::string SerializeHistory(const std::vector<EpochRecord> &history) {
  std::string out;
  for (const auto &r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["dev_loss"] = r.dev_loss;
    j["lr"] = r.lr;
    j["seconds"] = r.seconds;
    out += j.dump() + "\n";
  }
  return out;
}

void WriteHistory(const std::vector<EpochRecord> &history, const std::filesystem::path &path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
  f << SerializeHistory(history);
}

ExtractionOutputs ExtractWithModel(const SpexModel &model, const Waveform &mixture, const Waveform &reference) {
  RequireModelRate(mixture);
  RequireModelRate(reference);
  nn::NoGradGuard no_grad;
  Var mix = Var::Constant({1, 1, mixture.size()}, mixture.samples);
  Var ref = FeatureTensor(SpeakerFeatures(reference, model.config().features));
  ForwardResult f = model.Forward(mix, {ref});
  auto copy = [](const Var &v) { return std::vector<double>(v.value().begin(), v.value().end()); };
  return {copy(f.extraction.s1), copy(f.extraction.s2), copy(f.extraction.s3), copy(f.extraction.sw)};
}

Extractor ModelExtractor(const SpexModel &model) {
  return [&model](const EvalItem &item) { return ExtractWithModel(model, item.mixture, item.reference); };
}

EvaluationReport Evaluate(const Manifest &manifest, const Extractor &extractor) {
  EvaluationReport report;
  for (const auto &entry : manifest.entries) {
    EvalItem item;
    item.spec = &entry;
    item.mixture = LoadChecked(manifest.Resolve(entry.mixture_path));
    item.target = LoadChecked(manifest.Resolve(entry.target_path));
    item.reference = LoadChecked(manifest.Resolve(entry.reference_path));
    const ExtractionOutputs out = extractor(item);

    UtteranceScore u;
    u.id = entry.id;
    u.snr_db = entry.snr_db.empty() ? 0.0 : entry.snr_db.front();
    const auto &ref = item.target.samples;
    u.mixture_si_sdr = SiSdr(item.mixture.samples, ref);
    auto score = [&](const std::vector<double> &est) {
      StreamScore s;
      s.si_sdr = SiSdr(est, ref);
      s.si_sdri = s.si_sdr - u.mixture_si_sdr;
      return s;
    };
    u.s1 = score(out.s1);
    u.s2 = score(out.s2);
    u.s3 = score(out.s3);
    u.sw = score(out.sw);
    report.utterances.push_back(u);
  }
  const double n = static_cast<double>(report.utterances.size());
  if (n > 0) {
    auto acc = [&](auto member, StreamScore &mean) {
      for (const auto &u : report.utterances) {
        mean.si_sdr += (u.*member).si_sdr / n;
        mean.si_sdri += (u.*member).si_sdri / n;
      }
    };
    acc(&UtteranceScore::s1, report.mean_s1);
    acc(&UtteranceScore::s2, report.mean_s2);
    acc(&UtteranceScore::s3, report.mean_s3);
    acc(&UtteranceScore::sw, report.mean_sw);
    for (const auto &u : report.utterances) report.mean_mixture_si_sdr += u.mixture_si_sdr / n;
  }
  return report;
}

std::string ReportToJson(const EvaluationReport &report) {
  using nlohmann::ordered_json;
  auto stream = [](const StreamScore &s) { return ordered_json{{"si_sdr", s.si_sdr}, {"si_sdri", s.si_sdri}}; };
  ordered_json j;
  j["num_utterances"] = report.utterances.size();
  j["mean"] = {{"mixture_si_sdr", report.mean_mixture_si_sdr},
               {"s1", stream(report.mean_s1)},
               {"s2", stream(report.mean_s2)},
               {"s3", stream(report.mean_s3)},
               {"sw", stream(report.mean_sw)}};

  std::map<int, std::pair<int, StreamScore>> bins;
  ordered_json utts = ordered_json::array();
  for (const auto &u : report.utterances) {
    utts.push_back({{"id", u.id},
                    {"snr_db", u.snr_db},
                    {"mixture_si_sdr", u.mixture_si_sdr},
                    {"s1", stream(u.s1)},
                    {"s2", stream(u.s2)},
                    {"s3", stream(u.s3)},
                    {"sw", stream(u.sw)}});
    auto &bin = bins[static_cast<int>(std::floor(u.snr_db))];
    ++bin.first;
    bin.second.si_sdr += u.s1.si_sdr;
    bin.second.si_sdri += u.s1.si_sdri;
  }
  ordered_json by_snr = ordered_json::array();
  for (const auto &[lo, bin] : bins) {
    by_snr.push_back({{"snr_lo_db", lo},
                      {"snr_hi_db", lo + 1},
                      {"count", bin.first},
                      {"s1", stream({bin.second.si_sdr / bin.first, bin.second.si_sdri / bin.first})}});
  }
  j["by_snr"] = by_snr;
  j["utterances"] = utts;
  return j.dump(2) + "\n";
}

}  // namespace spex
