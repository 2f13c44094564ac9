// core/include/spex/nn/grad_check.h

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

#ifndef SPEX_NN_GRAD_CHECK_H_
#define SPEX_NN_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "spex/nn/tensor.h"

namespace spex::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t num_coordinates = 20;
  std::uint64_t seed = 1;
  // A sampled coordinate whose one-sided differences disagree by more than
  // this fraction sits near a kink (ReLU, PReLU); it is nudged and retried.
  double kink_tolerance = 1e-3;
  // A kink strictly inside [-eps, eps] can leave the one-sided slopes equal.
  // It shows up as disagreement between the central differences at eps and
  // eps / 2, which for smooth losses agree to O(eps^2) plus roundoff.
  double consistency_tolerance = 1e-5;
  int max_nudges = 5;
};

struct CoordinateCheck {
  std::size_t param = 0;  // index into the params list
  std::size_t offset = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t nudged = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<CoordinateCheck> coordinates;
};

/// Compares reverse-mode gradients of loss_fn with central differences on
/// coordinates sampled uniformly over all listed parameters. loss_fn must
/// rebuild the graph from the current parameter values on every call.
/// Error per coordinate is |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
/// Throws kNonFiniteLoss.
GradCheckResult GradCheck(const std::function<Var()> &loss_fn, const std::vector<Var> &params,
                          const GradCheckOptions &options = {});

}  // namespace spex::nn

#endif  // SPEX_NN_GRAD_CHECK_H_
