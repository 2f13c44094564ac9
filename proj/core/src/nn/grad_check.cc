// core/src/nn/grad_check.cc

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

#include "spex/nn/grad_check.h"

#include <algorithm>
#include <limits>
#include <cmath>

#include "spex/error.h"
#include "spex/rng.h"

namespace spex::nn {
namespace {

double Evaluate(const std::function<Var()> &loss_fn) {
  NoGradGuard no_grad;
  const double v = loss_fn().item();
  if (!std::isfinite(v)) throw Error(Errc::kNonFiniteLoss, "loss evaluated to " + std::to_string(v));
  return v;
}

// Analytic gradient of every coordinate at the current parameters.
std::vector<std::vector<double>> AnalyticGradients(const std::function<Var()> &loss_fn,
                                                   std::vector<Var> params) {
  for (auto &p : params) p.ZeroGrad();
  Var loss = loss_fn();
  if (!std::isfinite(loss.item()))
    throw Error(Errc::kNonFiniteLoss, "loss evaluated to " + std::to_string(loss.item()));
  Backward(loss);
  std::vector<std::vector<double>> grads;
  for (const auto &p : params) grads.emplace_back(p.grad().begin(), p.grad().end());
  return grads;
}

}  // namespace

GradCheckResult GradCheck(const std::function<Var()> &loss_fn, const std::vector<Var> &params,
                          const GradCheckOptions &opts) {
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto &p : params) {
    offsets.push_back(total);
    total += p.size();
  }
  if (total == 0) return {};

  Rng rng(opts.seed);
  GradCheckResult result;
  auto grads = AnalyticGradients(loss_fn, params);
  for (std::size_t n = 0; n < opts.num_coordinates; ++n) {
    const std::size_t flat = static_cast<std::size_t>(rng.Index(total));
    const std::size_t which =
        static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin()) - 1;
    const std::size_t idx = flat - offsets[which];
    Var param = params[which];
    double &slot = param.mutable_value()[idx];
    const double start = slot;

    double numeric = 0.0;
    bool moved = false;
    for (int attempt = 0;; ++attempt) {
      const double original = slot;
      const double f0 = Evaluate(loss_fn);
      slot = original + opts.eps;
      const double fp = Evaluate(loss_fn);
      slot = original - opts.eps;
      const double fm = Evaluate(loss_fn);
      slot = original + 0.5 * opts.eps;
      const double fph = Evaluate(loss_fn);
      slot = original - 0.5 * opts.eps;
      const double fmh = Evaluate(loss_fn);
      slot = original;
      numeric = (fp - fm) / (2.0 * opts.eps);
      const double half = (fph - fmh) / opts.eps;
      const double right = (fp - f0) / opts.eps, left = (f0 - fm) / opts.eps;
      const double scale = std::max({std::abs(right), std::abs(left), 1e-8});
      const double roundoff =
          16.0 * std::numeric_limits<double>::epsilon() * std::max({std::abs(fp), std::abs(fm), 1.0}) / opts.eps;
      const bool kink = (std::abs(right - left) > opts.kink_tolerance * scale &&
                         std::abs(right - left) > 1e3 * opts.eps * scale) ||
                        std::abs(numeric - half) > opts.consistency_tolerance * scale + roundoff;
      if (!kink || attempt >= opts.max_nudges) break;
      // Move off the kink and refresh the analytic gradient there.
      slot = original + (rng.Uniform() < 0.5 ? -1.0 : 1.0) * 10.0 * opts.eps * (attempt + 1);
      grads = AnalyticGradients(loss_fn, params);
      ++result.nudged;
      moved = true;
    }

    const double analytic = grads[which][idx];
    if (moved) {
      slot = start;
      grads = AnalyticGradients(loss_fn, params);
    }
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    if (err >= result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_analytic = analytic;
      result.worst_numeric = numeric;
    }
    result.coordinates.push_back({which, idx, analytic, numeric, err});
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace spex::nn
