// core/include/spex/objectives.h

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

#ifndef SPEX_OBJECTIVES_H_
#define SPEX_OBJECTIVES_H_

#include <span>
#include <vector>

#include "spex/model.h"
#include "spex/nn/tensor.h"

namespace spex {

inline constexpr double kSiSdrEps = 1e-8;

/// Scalar SI-SDR in dB of est against ref, both mean-removed, with eps
/// added to the error energy. Throws kSilentReference, kShapeMismatch.
double SiSdr(std::span<const double> est, std::span<const double> ref, double eps = kSiSdrEps);

/// si_sdr(est, ref) - si_sdr(mixture, ref).
double SiSdrImprovement(std::span<const double> est, std::span<const double> mixture,
                        std::span<const double> ref);

/// Batch-mean values of each loss term.
struct LossBreakdown {
  double j1 = 0.0;
  double j2 = 0.0;
  double total = 0.0;
  double rho1 = 0.0, rho2 = 0.0, rho3 = 0.0;
};

struct LossTerms {
  nn::Var j1;
  nn::Var j2;  // undefined when no item has a known label
  nn::Var total;
  LossBreakdown values;
};

/// J1 = -[(1-a-b) rho(s1,s) + a rho(s2,s) + b rho(s3,s)], averaged over the
/// batch. `target` is (B x 1 x T).
nn::Var MultiScaleLoss(const ExtractionResult &result, const nn::Var &target, double alpha,
                       double beta);

/// Batch-mean cross entropy of the speaker logits.
nn::Var SpeakerCrossEntropy(const nn::Var &logits, std::span<const int> labels);

double TotalLoss(double j1, double j2, double gamma);
nn::Var TotalLoss(const nn::Var &j1, const nn::Var &j2, double gamma);

/// Full multi-task objective. Items labelled -1 (speaker outside the
/// classifier) contribute to J1 only; J2 averages over the labelled items.
LossTerms SpexLoss(const ForwardResult &forward, const nn::Var &target, std::span<const int> labels,
                   const SpexConfig &config);

}  // namespace spex

#endif  // SPEX_OBJECTIVES_H_
