// core/src/nn/lstm.cc

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
#include <string>

#include "spex/error.h"

namespace spex::nn {
namespace {

using std::size_t;

double Sigm(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Activations cached per (batch, step): i, f, g, o, c, tanh(c), h.
struct DirectionCache {
  std::vector<double> gates;  // B*T*4H
  std::vector<double> cell;   // B*T*H
  std::vector<double> tanh_cell;
  std::vector<double> hidden;
};

void RunDirection(const double *x, size_t B, size_t F, size_t T, const LstmWeights &w,
                  bool reverse, size_t out_offset, size_t out_channels, double *out,
                  DirectionCache &cache) {
  const size_t H = w.hidden(), G = 4 * H;
  const double *wi = w.input.value().data();
  const double *wh = w.recurrent.value().data();
  const double *bias = w.bias.value().data();
  cache.gates.assign(B * T * G, 0.0);
  cache.cell.assign(B * T * H, 0.0);
  cache.tanh_cell.assign(B * T * H, 0.0);
  cache.hidden.assign(B * T * H, 0.0);
  std::vector<double> z(G), xt(F);
  for (size_t b = 0; b < B; ++b) {
    for (size_t step = 0; step < T; ++step) {
      const size_t t = reverse ? T - 1 - step : step;
      const long prev = reverse ? (step == 0 ? -1 : static_cast<long>(t + 1))
                                : (step == 0 ? -1 : static_cast<long>(t - 1));
      for (size_t f = 0; f < F; ++f) xt[f] = x[(b * F + f) * T + t];
      for (size_t r = 0; r < G; ++r) {
        double acc = bias[r];
        const double *row = wi + r * F;
        for (size_t f = 0; f < F; ++f) acc += row[f] * xt[f];
        if (prev >= 0) {
          const double *hp = &cache.hidden[(b * T + static_cast<size_t>(prev)) * H];
          const double *rrow = wh + r * H;
          for (size_t h = 0; h < H; ++h) acc += rrow[h] * hp[h];
        }
        z[r] = acc;
      }
      double *gates = &cache.gates[(b * T + t) * G];
      double *c = &cache.cell[(b * T + t) * H];
      double *tc = &cache.tanh_cell[(b * T + t) * H];
      double *hcur = &cache.hidden[(b * T + t) * H];
      const double *cprev = prev >= 0 ? &cache.cell[(b * T + static_cast<size_t>(prev)) * H] : nullptr;
      for (size_t h = 0; h < H; ++h) {
        const double ig = Sigm(z[h]), fg = Sigm(z[H + h]);
        const double gg = std::tanh(z[2 * H + h]), og = Sigm(z[3 * H + h]);
        gates[h] = ig;
        gates[H + h] = fg;
        gates[2 * H + h] = gg;
        gates[3 * H + h] = og;
        c[h] = (cprev ? fg * cprev[h] : 0.0) + ig * gg;
        tc[h] = std::tanh(c[h]);
        hcur[h] = og * tc[h];
        out[(b * out_channels + out_offset + h) * T + t] = hcur[h];
      }
    }
  }
}

void BackDirection(const Node &xn, Node *px, size_t B, size_t F, size_t T, const Node &wi_n,
                   const Node &wh_n, Node *pwi, Node *pwh, Node *pbias, bool reverse,
                   size_t out_offset, size_t out_channels, const double *gout,
                   const DirectionCache &cache) {
  const size_t H = wh_n.shape.channels, G = 4 * H;
  const double *wi = wi_n.value.data();
  const double *wh = wh_n.value.data();
  std::vector<double> dh(H), dc(H), dz(G);
  for (size_t b = 0; b < B; ++b) {
    std::fill(dh.begin(), dh.end(), 0.0);
    std::fill(dc.begin(), dc.end(), 0.0);
    for (size_t step = T; step-- > 0;) {
      const size_t t = reverse ? T - 1 - step : step;
      const long prev = reverse ? (step == 0 ? -1 : static_cast<long>(t + 1))
                                : (step == 0 ? -1 : static_cast<long>(t - 1));
      const double *gates = &cache.gates[(b * T + t) * G];
      const double *tc = &cache.tanh_cell[(b * T + t) * H];
      const double *cprev = prev >= 0 ? &cache.cell[(b * T + static_cast<size_t>(prev)) * H] : nullptr;
      const double *hprev = prev >= 0 ? &cache.hidden[(b * T + static_cast<size_t>(prev)) * H] : nullptr;
      for (size_t h = 0; h < H; ++h) {
        const double ig = gates[h], fg = gates[H + h], gg = gates[2 * H + h], og = gates[3 * H + h];
        const double dht = dh[h] + gout[(b * out_channels + out_offset + h) * T + t];
        const double dct = dc[h] + dht * og * (1.0 - tc[h] * tc[h]);
        dz[h] = dct * gg * ig * (1.0 - ig);
        dz[H + h] = cprev ? dct * cprev[h] * fg * (1.0 - fg) : 0.0;
        dz[2 * H + h] = dct * ig * (1.0 - gg * gg);
        dz[3 * H + h] = dht * tc[h] * og * (1.0 - og);
        dc[h] = dct * fg;
      }
      std::fill(dh.begin(), dh.end(), 0.0);
      for (size_t r = 0; r < G; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        if (pbias) pbias->grad[r] += d;
        const double *row = wi + r * F;
        for (size_t f = 0; f < F; ++f) {
          const size_t xi = (b * F + f) * T + t;
          if (pwi) pwi->grad[r * F + f] += d * xn.value[xi];
          if (px) px->grad[xi] += d * row[f];
        }
        if (hprev) {
          const double *rrow = wh + r * H;
          for (size_t h = 0; h < H; ++h) {
            if (pwh) pwh->grad[r * H + h] += d * hprev[h];
            dh[h] += d * rrow[h];
          }
        }
      }
    }
  }
}

void CheckWeights(const LstmWeights &w, size_t F, const char *name) {
  const size_t H = w.hidden();
  const Shape in{4 * H, F, 1}, rec{4 * H, H, 1}, bias{1, 4 * H, 1};
  if (!(w.input.shape() == in) || !(w.recurrent.shape() == rec) || !(w.bias.shape() == bias))
    throw Error(Errc::kShapeMismatch, std::string(name) + " LSTM weights do not match input dim " +
                                          std::to_string(F));
}

}  // namespace

Var BiLstm(const Var &x, const LstmWeights &fwd, const LstmWeights &bwd) {
  const Shape s = x.shape();
  const size_t B = s.batch, F = s.channels, T = s.frames;
  if (T == 0) throw Error(Errc::kShapeMismatch, "BLSTM needs at least one frame");
  CheckWeights(fwd, F, "forward");
  CheckWeights(bwd, F, "backward");
  if (fwd.hidden() != bwd.hidden())
    throw Error(Errc::kShapeMismatch, "BLSTM directions must share the hidden size");
  const size_t H = fwd.hidden();
  Shape os{B, 2 * H, T};
  std::vector<double> out(os.size());
  auto caches = std::make_shared<std::pair<DirectionCache, DirectionCache>>();
  RunDirection(x.value().data(), B, F, T, fwd, false, 0, 2 * H, out.data(), caches->first);
  RunDirection(x.value().data(), B, F, T, bwd, true, H, 2 * H, out.data(), caches->second);

  return MakeResult(os, std::move(out),
                    {x, fwd.input, fwd.recurrent, fwd.bias, bwd.input, bwd.recurrent, bwd.bias},
                    [B, F, T, H, caches](Node &self) {
    auto grad_of = [&](size_t i) -> Node * {
      Node *p = self.parents[i].get();
      return p->requires_grad ? p : nullptr;
    };
    const Node &xn = *self.parents[0];
    BackDirection(xn, grad_of(0), B, F, T, *self.parents[1], *self.parents[2], grad_of(1),
                  grad_of(2), grad_of(3), false, 0, 2 * H, self.grad.data(), caches->first);
    BackDirection(xn, grad_of(0), B, F, T, *self.parents[4], *self.parents[5], grad_of(4),
                  grad_of(5), grad_of(6), true, H, 2 * H, self.grad.data(), caches->second);
  });
}

}  // namespace spex::nn
