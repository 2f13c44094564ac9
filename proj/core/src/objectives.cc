// core/src/objectives.cc

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

#include "spex/objectives.h"

#include <cmath>
#include <numeric>

#include "spex/error.h"
#include "spex/nn/ops.h"

namespace spex {

double SiSdr(std::span<const double> est, std::span<const double> ref, double eps) {
  if (est.size() != ref.size() || est.size() < 2)
    throw Error(Errc::kShapeMismatch, "si_sdr needs equal lengths of at least 2");
  const double n = static_cast<double>(est.size());
  const double me = std::accumulate(est.begin(), est.end(), 0.0) / n;
  const double mr = std::accumulate(ref.begin(), ref.end(), 0.0) / n;
  double dot = 0.0, rr = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    dot += (est[t] - me) * (ref[t] - mr);
    rr += (ref[t] - mr) * (ref[t] - mr);
  }
  if (rr <= 0.0) throw Error(Errc::kSilentReference, "reference is zero after mean removal");
  const double a = dot / rr;
  double target = 0.0, error = 0.0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    const double proj = a * (ref[t] - mr);
    const double e = (est[t] - me) - proj;
    target += proj * proj;
    error += e * e;
  }
  return 10.0 * std::log10(target / (error + eps));
}

double SiSdrImprovement(std::span<const double> est, std::span<const double> mixture,
                        std::span<const double> ref) {
  return SiSdr(est, ref) - SiSdr(mixture, ref);
}

nn::Var MultiScaleLoss(const ExtractionResult &r, const nn::Var &target, double alpha, double beta) {
  const nn::Var rho1 = nn::SiSdr(r.s1, target, kSiSdrEps);
  const nn::Var rho2 = nn::SiSdr(r.s2, target, kSiSdrEps);
  const nn::Var rho3 = nn::SiSdr(r.s3, target, kSiSdrEps);
  return nn::Mean(nn::WeightedSum({rho1, rho2, rho3}, {-(1.0 - alpha - beta), -alpha, -beta}));
}

nn::Var SpeakerCrossEntropy(const nn::Var &logits, std::span<const int> labels) {
  return nn::CrossEntropy(logits, labels);
}

double TotalLoss(double j1, double j2, double gamma) { return (1.0 - gamma) * j1 + gamma * j2; }

nn::Var TotalLoss(const nn::Var &j1, const nn::Var &j2, double gamma) {
  return nn::WeightedSum({j1, j2}, {1.0 - gamma, gamma});
}

LossTerms SpexLoss(const ForwardResult &f, const nn::Var &target, std::span<const int> labels,
                   const SpexConfig &config) {
  const ExtractionResult &r = f.extraction;
  const nn::Var rho1 = nn::SiSdr(r.s1, target, kSiSdrEps);
  const nn::Var rho2 = nn::SiSdr(r.s2, target, kSiSdrEps);
  const nn::Var rho3 = nn::SiSdr(r.s3, target, kSiSdrEps);
  const double a = config.alpha, b = config.beta;

  LossTerms out;
  out.j1 = nn::Mean(nn::WeightedSum({rho1, rho2, rho3}, {-(1.0 - a - b), -a, -b}));
  out.values.j1 = out.j1.item();
  auto mean = [](const nn::Var &v) {
    double s = 0.0;
    for (double x : v.value()) s += x;
    return s / static_cast<double>(v.size());
  };
  out.values.rho1 = mean(rho1);
  out.values.rho2 = mean(rho2);
  out.values.rho3 = mean(rho3);

  const std::size_t batch = f.speaker.logits.shape().batch;
  if (labels.size() != batch) throw Error(Errc::kShapeMismatch, "one speaker label per item is required");
  std::vector<nn::Var> known_rows;
  std::vector<int> known_labels;
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0) continue;
    known_labels.push_back(labels[i]);
    known_rows.push_back(nn::SliceBatch(f.speaker.logits, i));
  }
  if (!known_labels.empty()) {
    const nn::Var logits =
        known_labels.size() == batch ? f.speaker.logits : nn::StackBatch(known_rows);
    out.j2 = nn::CrossEntropy(logits, known_labels);
    out.values.j2 = out.j2.item();
    out.total = TotalLoss(out.j1, out.j2, config.gamma);
  } else {
    out.total = nn::Scale(out.j1, 1.0 - config.gamma);
  }
  out.values.total = out.total.item();
  return out;
}

}  // namespace spex
