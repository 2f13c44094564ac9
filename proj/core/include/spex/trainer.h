// core/include/spex/trainer.h

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

#ifndef SPEX_TRAINER_H_
#define SPEX_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spex/mixsim.h"
#include "spex/model.h"
#include "spex/nn/tensor.h"
#include "spex/objectives.h"

namespace spex {

struct TrainConfig {
  double lr0 = 1e-3;
  int lr_halve_patience_epochs = 3;
  int early_stop_patience_epochs = 10;
  double segment_seconds = 4.0;
  int batch_size = 10;
  int max_epochs = 100;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping
  // Count an epoch as bad only when the dev loss rises over the previous
  // epoch, instead of failing to beat the best so far.
  bool strict_increase = false;
  bool full_utterance_dev = false;

  void Validate(const SpexConfig &model) const;
};

/// Maps target-speaker ids to classifier indices in sorted id order.
using SpeakerIndex = std::map<std::string, int>;
SpeakerIndex BuildSpeakerIndex(const Manifest &manifest);

/// One training example: aligned mixture/target windows plus the reference
/// features of its entry.
struct TrainingSegment {
  std::string entry_id;
  std::vector<double> mixture;
  std::vector<double> target;
  nn::Var reference;  // (1 x 60 x frames)
  int speaker_label = -1;  // -1 when the speaker is not in the index
};

inline constexpr double kSilenceFloor = 1e-6;

/// Cuts each entry into non-overlapping windows of segment_seconds.
/// Partial trailing windows and windows whose target power is below
/// kSilenceFloor are dropped. Throws kEmptyAfterSegmentation.
std::vector<TrainingSegment> SegmentManifest(const Manifest &manifest, double segment_seconds,
                                             const FeatureOptions &features, const SpeakerIndex &speakers);

/// Whole-utterance items, one per entry.
std::vector<TrainingSegment> UtteranceItems(const Manifest &manifest, const FeatureOptions &features,
                                            const SpeakerIndex &speakers);

/// Plateau learning-rate schedule with early stopping.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, int halve_patience, int stop_patience, bool strict_increase = false);

  struct Decision {
    bool improved = false;
    bool halved = false;
    bool stop = false;
    double lr = 0.0;  // rate for the next epoch
  };

  Decision Observe(double dev_loss);

  double lr() const { return lr_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }
  int bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  int halve_patience_;
  int stop_patience_;
  bool strict_increase_;
  int epoch_ = -1;
  int best_epoch_ = -1;
  double best_loss_ = 0.0;
  double previous_loss_ = 0.0;
  int bad_epochs_ = 0;
  int since_halving_ = 0;
};

class Adam {
 public:
  Adam(std::vector<nn::Var> params, double beta1, double beta2, double eps);
  void Step(double lr);
  void ZeroGrad();
  /// Scales gradients so their global L2 norm is at most max_norm; returns
  /// the norm before clipping.
  double ClipGradNorm(double max_norm);

 private:
  std::vector<nn::Var> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  long step_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_dev_loss = 0.0;
  bool aborted = false;  // a non-finite loss stopped training
  std::string abort_message;
};

struct TrainHooks {
  std::function<void(const EpochRecord &)> on_epoch;
  // Called with the model holding the new best parameters.
  std::function<void(const SpexModel &, const EpochRecord &)> on_best;
};

/// Mean total loss over items, forward only.
double DevLoss(const SpexModel &model, const std::vector<TrainingSegment> &items, int batch_size);

/// Shuffled order of segment indices for an epoch.
std::vector<std::size_t> EpochOrder(std::size_t count, std::uint64_t seed, int epoch);

/// Adam training with the plateau schedule; on return the model holds the
/// parameters of the epoch with the lowest dev loss.
TrainResult Train(SpexModel &model, const std::vector<TrainingSegment> &train,
                  const std::vector<TrainingSegment> &dev, const TrainConfig &config,
                  const TrainHooks &hooks = {});

/// JSONL, one `{epoch, train_loss, dev_loss, lr, seconds}` per line.
std::string SerializeHistory(const std::vector<EpochRecord> &history);
void WriteHistory(const std::vector<EpochRecord> &history, const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// Evaluation

struct ExtractionOutputs {
  std::vector<double> s1, s2, s3, sw;
};

struct EvalItem {
  const MixtureSpec *spec = nullptr;
  Waveform mixture;
  Waveform target;
  Waveform reference;
};

using Extractor = std::function<ExtractionOutputs(const EvalItem &)>;

/// Full-length extraction of one mixture with the given reference.
ExtractionOutputs ExtractWithModel(const SpexModel &model, const Waveform &mixture,
                                   const Waveform &reference);
Extractor ModelExtractor(const SpexModel &model);

struct StreamScore {
  double si_sdr = 0.0;
  double si_sdri = 0.0;
};

struct UtteranceScore {
  std::string id;
  double mixture_si_sdr = 0.0;
  StreamScore s1, s2, s3, sw;
  double snr_db = 0.0;  // first interferer
};

struct EvaluationReport {
  std::vector<UtteranceScore> utterances;
  double mean_mixture_si_sdr = 0.0;
  StreamScore mean_s1, mean_s2, mean_s3, mean_sw;
};

EvaluationReport Evaluate(const Manifest &manifest, const Extractor &extractor);
/// JSON with means, per-utterance scores and a per-SNR-bin breakdown.
std::string ReportToJson(const EvaluationReport &report);

}  // namespace spex

#endif  // SPEX_TRAINER_H_
