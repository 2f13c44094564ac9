// tests/unit/objectives_test.cc

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

#include <gtest/gtest.h>

#include "spex/error.h"
#include "spex/nn/grad_check.h"
#include "spex/nn/ops.h"
#include "test_util.h"

namespace spex {
namespace {

using nn::Var;

TEST(SiSdrTest, HandComputedValue) {
  // Noise orthogonal to the reference: rho = 10 log10(2 / (6 + eps)).
  std::vector<double> ref = {1, 0, -1};
  std::vector<double> est = {2, -2, 0};
  EXPECT_NEAR(SiSdr(est, ref), 10 * std::log10(2.0 / (6.0 + kSiSdrEps)), 1e-12);
  EXPECT_NEAR(SiSdr(est, ref), -4.771, 5e-4);
}

TEST(SiSdrTest, Invariances) {
  Rng rng(1);
  auto ref = testing::RandomValues(500, rng);
  auto est = testing::RandomValues(500, rng);
  for (std::size_t i = 0; i < est.size(); ++i) est[i] += 2 * ref[i];
  const double base = SiSdr(est, ref);
  auto scaled = est;
  for (double &v : scaled) v *= -7.5;
  auto shifted = est;
  for (double &v : shifted) v += 3.0;
  EXPECT_NEAR(SiSdr(scaled, ref), base, 1e-9);
  EXPECT_NEAR(SiSdr(shifted, ref), base, 1e-9);
  EXPECT_GT(SiSdr(ref, ref), 100.0);
}

TEST(SiSdrTest, Errors) {
  std::vector<double> ref(10, 0.5), est(10, 1.0), short_est(9, 1.0);
  try {
    SiSdr(est, ref);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kSilentReference);
  }
  std::vector<double> r = {1, 2, 3, 0, 1, 2, 3, 4, 5, 1};
  try {
    SiSdr(short_est, r);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), Errc::kShapeMismatch);
  }
}

TEST(SiSdrTest, ImprovementAndTensorAgree) {
  Rng rng(2);
  auto ref = testing::RandomValues(64, rng);
  auto mix = testing::RandomValues(64, rng);
  for (std::size_t i = 0; i < 64; ++i) mix[i] += ref[i];
  auto est = mix;
  for (std::size_t i = 0; i < 64; ++i) est[i] = 0.5 * (mix[i] + ref[i]);
  EXPECT_NEAR(SiSdrImprovement(est, mix, ref), SiSdr(est, ref) - SiSdr(mix, ref), 1e-12);
  Var v = nn::SiSdr(Var::Constant({1, 1, 64}, est), Var::Constant({1, 1, 64}, ref));
  EXPECT_NEAR(v.item(), SiSdr(est, ref), 1e-12);
}

ExtractionResult Streams(Rng &rng, std::size_t B, std::size_t T) {
  ExtractionResult r;
  r.s1 = testing::RandomParam({B, 1, T}, rng);
  r.s2 = testing::RandomParam({B, 1, T}, rng);
  r.s3 = testing::RandomParam({B, 1, T}, rng);
  return r;
}

TEST(LossTest, MultiScaleDegenerateCases) {
  Rng rng(3);
  auto r = Streams(rng, 3, 40);
  Var target = testing::RandomConst({3, 1, 40}, rng);
  EXPECT_EQ(MultiScaleLoss(r, target, 0.0, 0.0).item(), -nn::Mean(nn::SiSdr(r.s1, target)).item());
  const double rho1 = nn::Mean(nn::SiSdr(r.s1, target)).item();
  const double rho2 = nn::Mean(nn::SiSdr(r.s2, target)).item();
  const double rho3 = nn::Mean(nn::SiSdr(r.s3, target)).item();
  EXPECT_NEAR(MultiScaleLoss(r, target, 0.2, 0.3).item(), -(0.5 * rho1 + 0.2 * rho2 + 0.3 * rho3), 1e-12);
}

TEST(LossTest, TotalLossEndpoints) {
  EXPECT_EQ(TotalLoss(-3.5, 1.25, 0.0), -3.5);
  EXPECT_EQ(TotalLoss(-3.5, 1.25, 1.0), 1.25);
  EXPECT_DOUBLE_EQ(TotalLoss(-3.5, 1.25, 0.2), 0.8 * -3.5 + 0.2 * 1.25);
  Var j1 = Var::Constant({1, 1, 1}, -3.5), j2 = Var::Constant({1, 1, 1}, 1.25);
  EXPECT_EQ(TotalLoss(j1, j2, 0.0).item(), -3.5);
  EXPECT_EQ(TotalLoss(j1, j2, 1.0).item(), 1.25);
}

TEST(LossTest, UniformLogitsGiveLogClassCount) {
  Var logits = Var::Constant({4, 101, 1}, 0.0);
  std::vector<int> labels = {0, 3, 99, 100};
  EXPECT_NEAR(SpeakerCrossEntropy(logits, labels).item(), std::log(101.0), 1e-10);
  EXPECT_NEAR(std::log(101.0), 4.6151, 1e-4);
}

ForwardResult FakeForward(Rng &rng, std::size_t B, std::size_t T, std::size_t classes) {
  ForwardResult f;
  f.extraction = Streams(rng, B, T);
  f.extraction.sw = f.extraction.s1;
  f.speaker.logits = testing::RandomParam({B, classes, 1}, rng);
  return f;
}

TEST(LossTest, UnknownSpeakersOnlyContributeToJ1) {
  Rng rng(4);
  SpexConfig c = MicroConfig();
  ForwardResult f = FakeForward(rng, 3, 50, c.n_speakers);
  Var target = testing::RandomConst({3, 1, 50}, rng);
  std::vector<int> labels = {1, -1, 3};
  LossTerms t = SpexLoss(f, target, labels, c);
  std::vector<int> known = {1, 3};
  Var kept = nn::StackBatch({nn::SliceBatch(f.speaker.logits, 0), nn::SliceBatch(f.speaker.logits, 2)});
  EXPECT_NEAR(t.values.j2, nn::CrossEntropy(kept, known).item(), 1e-12);
  EXPECT_NEAR(t.values.total, 0.8 * t.values.j1 + 0.2 * t.values.j2, 1e-12);
  std::vector<int> none = {-1, -1, -1};
  LossTerms u = SpexLoss(f, target, none, c);
  EXPECT_FALSE(u.j2.defined());
  EXPECT_NEAR(u.values.total, 0.8 * u.values.j1, 1e-12);
}

TEST(LossTest, BreakdownMatchesTerms) {
  Rng rng(5);
  SpexConfig c = MicroConfig();
  c.alpha = 0.25;
  c.beta = 0.15;
  ForwardResult f = FakeForward(rng, 2, 30, c.n_speakers);
  Var target = testing::RandomConst({2, 1, 30}, rng);
  std::vector<int> labels = {0, 2};
  LossTerms t = SpexLoss(f, target, labels, c);
  EXPECT_NEAR(t.values.j1, -(0.6 * t.values.rho1 + 0.25 * t.values.rho2 + 0.15 * t.values.rho3), 1e-12);
  EXPECT_EQ(t.values.total, t.total.item());
  nn::GradCheckOptions opts;
  opts.num_coordinates = 30;
  auto r = nn::GradCheck([&] { return SpexLoss(f, target, labels, c).total; },
                         {f.extraction.s1, f.extraction.s2, f.extraction.s3, f.speaker.logits}, opts);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

}  // namespace
}  // namespace spex
