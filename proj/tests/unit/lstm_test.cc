// tests/unit/lstm_test.cc

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

#include "spex/nn/lstm.h"

#include <cmath>

#include <gtest/gtest.h>

#include "spex/nn/grad_check.h"
#include "spex/nn/ops.h"
#include "test_util.h"

namespace spex::nn {
namespace {

using spex::testing::RandomConst;
using spex::testing::RandomParam;

LstmWeights RandomWeights(std::size_t F, std::size_t H, Rng &rng, bool trainable) {
  auto make = [&](Shape s) { return trainable ? RandomParam(s, rng, 0.5) : RandomConst(s, rng, 0.5); };
  return {make({4 * H, F, 1}), make({4 * H, H, 1}), make({1, 4 * H, 1})};
}

double Sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar recurrence over one item; returns hidden states (T x H) in time order.
std::vector<std::vector<double>> RunDirection(const Var &x, std::size_t b, const LstmWeights &w, bool reverse) {
  const std::size_t F = x.shape().channels, T = x.shape().frames, H = w.hidden();
  std::vector<std::vector<double>> out(T, std::vector<double>(H));
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    std::vector<double> z(4 * H);
    for (std::size_t j = 0; j < 4 * H; ++j) {
      double acc = w.bias.value()[j];
      for (std::size_t f = 0; f < F; ++f) acc += w.input.value()[j * F + f] * x.at(b, f, t);
      for (std::size_t k = 0; k < H; ++k) acc += w.recurrent.value()[j * H + k] * h[k];
      z[j] = acc;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const double i = Sig(z[k]), f = Sig(z[H + k]), g = std::tanh(z[2 * H + k]), o = Sig(z[3 * H + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
    out[t] = h;
  }
  return out;
}

TEST(BiLstmTest, MatchesScalarRecurrence) {
  Rng rng(21);
  const std::size_t F = 5, H = 3, T = 7;
  Var x = RandomConst({2, F, T}, rng);
  LstmWeights fw = RandomWeights(F, H, rng, false), bw = RandomWeights(F, H, rng, false);
  Var y = BiLstm(x, fw, bw);
  ASSERT_EQ(y.shape(), (Shape{2, 2 * H, T}));
  for (std::size_t b = 0; b < 2; ++b) {
    auto hf = RunDirection(x, b, fw, false);
    auto hb = RunDirection(x, b, bw, true);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < H; ++k) {
        EXPECT_NEAR(y.at(b, k, t), hf[t][k], 1e-12);
        EXPECT_NEAR(y.at(b, H + k, t), hb[t][k], 1e-12);
      }
  }
}

// Reversing time and swapping the directions' weights mirrors the output.
TEST(BiLstmTest, TimeReversalSymmetry) {
  Rng rng(22);
  const std::size_t F = 4, H = 3, T = 9;
  Var x = RandomConst({1, F, T}, rng);
  std::vector<double> rev(x.size());
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t t = 0; t < T; ++t) rev[f * T + t] = x.at(0, f, T - 1 - t);
  LstmWeights a = RandomWeights(F, H, rng, false), b = RandomWeights(F, H, rng, false);
  Var y = BiLstm(x, a, b);
  Var yr = BiLstm(Var::Constant({1, F, T}, rev), b, a);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t k = 0; k < H; ++k) {
      EXPECT_NEAR(y.at(0, k, t), yr.at(0, H + k, T - 1 - t), 1e-13);
      EXPECT_NEAR(y.at(0, H + k, t), yr.at(0, k, T - 1 - t), 1e-13);
    }
}

TEST(BiLstmTest, GradientsMatchFiniteDifferences) {
  Rng rng(23);
  const std::size_t F = 4, H = 3, T = 6;
  Var x = RandomParam({2, F, T}, rng);
  LstmWeights fw = RandomWeights(F, H, rng, true), bw = RandomWeights(F, H, rng, true);
  Var r = RandomConst({2, 2 * H, T}, rng);
  GradCheckOptions opts;
  opts.num_coordinates = 40;
  auto result = GradCheck([&] { Var y = BiLstm(x, fw, bw); return Mean(Mul(Mul(y, y), r)); },
                          {x, fw.input, fw.recurrent, fw.bias, bw.input, bw.recurrent, bw.bias}, opts);
  EXPECT_LT(result.max_relative_error, 1e-4);
}

}  // namespace
}  // namespace spex::nn
