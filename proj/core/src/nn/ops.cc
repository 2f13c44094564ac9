// core/src/nn/ops.cc

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

#include "spex/nn/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "spex/error.h"

namespace spex::nn {
namespace {

using std::size_t;

// Parent i when it takes a gradient, else nullptr.
Node *GradParent(Node &self, size_t i) {
  Node *p = self.parents.size() > i ? self.parents[i].get() : nullptr;
  return (p && p->requires_grad) ? p : nullptr;
}

void Require(bool ok, const std::string &what) {
  if (!ok) throw Error(Errc::kShapeMismatch, what);
}

// Valid output-frame range [lo, hi) for input offset `offset` so that
// 0 <= t*stride + offset < frames_in.
void FrameRange(long offset, size_t stride, size_t frames_in, size_t frames_out,
                size_t &lo, size_t &hi) {
  const long s = static_cast<long>(stride);
  long l = offset >= 0 ? 0 : (-offset + s - 1) / s;
  long last = static_cast<long>(frames_in) - 1 - offset;
  long h = last < 0 ? 0 : last / s + 1;
  h = std::min<long>(h, static_cast<long>(frames_out));
  lo = static_cast<size_t>(std::max<long>(l, 0));
  hi = static_cast<size_t>(std::max<long>(h, static_cast<long>(lo)));
}

double SigmoidScalar(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

size_t ConvSpec::OutFrames(size_t frames) const {
  const size_t padded = frames + pad_left + pad_right;
  const size_t span = dilation * (kernel - 1) + 1;
  if (padded < span) return 0;
  return (padded - span) / stride + 1;
}

void ConvSpec::Validate() const {
  Require(in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0 &&
              dilation > 0 && groups > 0,
          "conv spec fields must be positive");
  Require(in_channels % groups == 0 && out_channels % groups == 0,
          "conv channels must be divisible by groups");
}

size_t ConvSpec::NumParameters(bool with_bias) const {
  return out_channels * (in_channels / groups) * kernel + (with_bias ? out_channels : 0);
}

Var Conv1d(const Var &x, const Var &weight, const Var &bias, const ConvSpec &spec) {
  spec.Validate();
  const Shape xs = x.shape();
  Require(xs.channels == spec.in_channels,
          "conv1d input has " + std::to_string(xs.channels) + " channels, expected " +
              std::to_string(spec.in_channels));
  Require(weight.shape() == spec.WeightShape(),
          "conv1d weight " + weight.shape().str() + " vs " + spec.WeightShape().str());
  if (bias.defined())
    Require(bias.size() == spec.out_channels, "conv1d bias size");
  const size_t tout = spec.OutFrames(xs.frames);
  Require(tout > 0, "conv1d input of " + std::to_string(xs.frames) + " frames is too short");

  const size_t B = xs.batch, T = xs.frames, O = spec.out_channels;
  const size_t in_g = spec.in_channels / spec.groups, out_g = O / spec.groups;
  const size_t K = spec.kernel, S = spec.stride, Dl = spec.dilation;
  const long pad = static_cast<long>(spec.pad_left);
  Shape os{B, O, tout};
  std::vector<double> out(os.size(), 0.0);
  const double *xv = x.value().data();
  const double *wv = weight.value().data();

  for (size_t b = 0; b < B; ++b) {
    for (size_t o = 0; o < O; ++o) {
      double *orow = &out[(b * O + o) * tout];
      if (bias.defined()) std::fill(orow, orow + tout, bias.value()[o]);
      const size_t g = o / out_g;
      for (size_t ic = 0; ic < in_g; ++ic) {
        const double *xrow = xv + (b * spec.in_channels + g * in_g + ic) * T;
        const double *wrow = wv + (o * in_g + ic) * K;
        for (size_t k = 0; k < K; ++k) {
          const long offset = static_cast<long>(k * Dl) - pad;
          size_t lo, hi;
          FrameRange(offset, S, T, tout, lo, hi);
          const double w = wrow[k];
          if (S == 1) {
            for (size_t t = lo; t < hi; ++t) orow[t] += w * xrow[static_cast<long>(t) + offset];
          } else {
            for (size_t t = lo; t < hi; ++t) orow[t] += w * xrow[t * S + offset];
          }
        }
      }
    }
  }

  return MakeResult(os, std::move(out), {x, weight, bias},
                    [spec, B, T, O, in_g, out_g, K, S, Dl, pad, tout](Node &self) {
    Node *px = GradParent(self, 0), *pw = GradParent(self, 1), *pb = GradParent(self, 2);
    const Node &xn = *self.parents[0];
    const Node &wn = *self.parents[1];
    const double *gout = self.grad.data();
    for (size_t b = 0; b < B; ++b) {
      for (size_t o = 0; o < O; ++o) {
        const double *grow = gout + (b * O + o) * tout;
        if (pb) {
          double acc = 0.0;
          for (size_t t = 0; t < tout; ++t) acc += grow[t];
          pb->grad[o] += acc;
        }
        const size_t g = o / out_g;
        for (size_t ic = 0; ic < in_g; ++ic) {
          const size_t xoff = (b * spec.in_channels + g * in_g + ic) * T;
          const double *xrow = xn.value.data() + xoff;
          const size_t woff = (o * in_g + ic) * K;
          for (size_t k = 0; k < K; ++k) {
            const long offset = static_cast<long>(k * Dl) - pad;
            size_t lo, hi;
            FrameRange(offset, S, T, tout, lo, hi);
            if (pw) {
              double acc = 0.0;
              for (size_t t = lo; t < hi; ++t) acc += grow[t] * xrow[t * S + offset];
              pw->grad[woff + k] += acc;
            }
            if (px) {
              const double w = wn.value[woff + k];
              double *gx = px->grad.data() + xoff;
              for (size_t t = lo; t < hi; ++t) gx[t * S + offset] += w * grow[t];
            }
          }
        }
      }
    }
  });
}

Var ConvTranspose1d(const Var &x, const Var &weight, const Var &bias, const ConvSpec &spec) {
  spec.Validate();
  Require(spec.groups == 1, "conv_transpose1d supports groups == 1 only");
  const Shape xs = x.shape();
  Require(xs.channels == spec.in_channels,
          "conv_transpose1d input has " + std::to_string(xs.channels) + " channels, expected " +
              std::to_string(spec.in_channels));
  const Shape ws{spec.in_channels, spec.out_channels, spec.kernel};
  Require(weight.shape() == ws, "conv_transpose1d weight " + weight.shape().str() + " vs " + ws.str());
  if (bias.defined()) Require(bias.size() == spec.out_channels, "conv_transpose1d bias size");

  const size_t B = xs.batch, C = spec.in_channels, O = spec.out_channels, T = xs.frames;
  const size_t K = spec.kernel, S = spec.stride;
  const size_t tout = (T - 1) * S + K;
  Shape os{B, O, tout};
  std::vector<double> out(os.size(), 0.0);
  const double *xv = x.value().data();
  const double *wv = weight.value().data();
  for (size_t b = 0; b < B; ++b) {
    for (size_t o = 0; o < O; ++o) {
      double *orow = &out[(b * O + o) * tout];
      if (bias.defined()) std::fill(orow, orow + tout, bias.value()[o]);
      for (size_t c = 0; c < C; ++c) {
        const double *xrow = xv + (b * C + c) * T;
        const double *wrow = wv + (c * O + o) * K;
        for (size_t t = 0; t < T; ++t) {
          const double xval = xrow[t];
          double *dst = orow + t * S;
          for (size_t k = 0; k < K; ++k) dst[k] += xval * wrow[k];
        }
      }
    }
  }
  return MakeResult(os, std::move(out), {x, weight, bias}, [B, C, O, T, K, S, tout](Node &self) {
    Node *px = GradParent(self, 0), *pw = GradParent(self, 1), *pb = GradParent(self, 2);
    const Node &xn = *self.parents[0];
    const Node &wn = *self.parents[1];
    for (size_t b = 0; b < B; ++b) {
      for (size_t o = 0; o < O; ++o) {
        const double *grow = self.grad.data() + (b * O + o) * tout;
        if (pb) {
          double acc = 0.0;
          for (size_t t = 0; t < tout; ++t) acc += grow[t];
          pb->grad[o] += acc;
        }
        for (size_t c = 0; c < C; ++c) {
          const size_t xoff = (b * C + c) * T;
          const size_t woff = (c * O + o) * K;
          const double *wrow = wn.value.data() + woff;
          const double *xrow = xn.value.data() + xoff;
          for (size_t t = 0; t < T; ++t) {
            const double *src = grow + t * S;
            if (px) {
              double acc = 0.0;
              for (size_t k = 0; k < K; ++k) acc += src[k] * wrow[k];
              px->grad[xoff + t] += acc;
            }
            if (pw) {
              const double xval = xrow[t];
              double *gw = pw->grad.data() + woff;
              for (size_t k = 0; k < K; ++k) gw[k] += xval * src[k];
            }
          }
        }
      }
    }
  });
}

Var Relu(const Var &x) {
  std::vector<double> out(x.value().begin(), x.value().end());
  for (double &v : out) v = v > 0.0 ? v : 0.0;
  return MakeResult(x.shape(), std::move(out), {x}, [](Node &self) {
    Node *px = GradParent(self, 0);
    if (!px) return;
    for (size_t i = 0; i < self.value.size(); ++i)
      if (px->value[i] > 0.0) px->grad[i] += self.grad[i];
  });
}

Var PRelu(const Var &x, const Var &slope) {
  const Shape s = x.shape();
  Require(slope.size() == s.channels, "prelu slope needs one value per channel");
  std::vector<double> out(s.size());
  const double *xv = x.value().data();
  for (size_t b = 0; b < s.batch; ++b)
    for (size_t c = 0; c < s.channels; ++c) {
      const double a = slope.value()[c];
      const size_t off = (b * s.channels + c) * s.frames;
      for (size_t t = 0; t < s.frames; ++t) {
        const double v = xv[off + t];
        out[off + t] = v > 0.0 ? v : a * v;
      }
    }
  return MakeResult(s, std::move(out), {x, slope}, [s](Node &self) {
    Node *px = GradParent(self, 0), *pa = GradParent(self, 1);
    const Node &xn = *self.parents[0];
    const Node &an = *self.parents[1];
    for (size_t b = 0; b < s.batch; ++b)
      for (size_t c = 0; c < s.channels; ++c) {
        const double a = an.value[c];
        const size_t off = (b * s.channels + c) * s.frames;
        double ga = 0.0;
        for (size_t t = 0; t < s.frames; ++t) {
          const double v = xn.value[off + t], g = self.grad[off + t];
          if (v > 0.0) {
            if (px) px->grad[off + t] += g;
          } else {
            if (px) px->grad[off + t] += a * g;
            ga += v * g;
          }
        }
        if (pa) pa->grad[c] += ga;
      }
  });
}

Var Sigmoid(const Var &x) {
  std::vector<double> out(x.value().begin(), x.value().end());
  for (double &v : out) v = SigmoidScalar(v);
  return MakeResult(x.shape(), std::move(out), {x}, [](Node &self) {
    Node *px = GradParent(self, 0);
    if (!px) return;
    for (size_t i = 0; i < self.value.size(); ++i) {
      const double y = self.value[i];
      px->grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Var Softmax(const Var &x) {
  const Shape s = x.shape();
  std::vector<double> out(s.size());
  for (size_t b = 0; b < s.batch; ++b)
    for (size_t t = 0; t < s.frames; ++t) {
      double mx = -std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < s.channels; ++c)
        mx = std::max(mx, x.at(b, c, t));
      double z = 0.0;
      for (size_t c = 0; c < s.channels; ++c) {
        const size_t i = (b * s.channels + c) * s.frames + t;
        out[i] = std::exp(x.value()[i] - mx);
        z += out[i];
      }
      for (size_t c = 0; c < s.channels; ++c) out[(b * s.channels + c) * s.frames + t] /= z;
    }
  return MakeResult(s, std::move(out), {x}, [s](Node &self) {
    Node *px = GradParent(self, 0);
    if (!px) return;
    for (size_t b = 0; b < s.batch; ++b)
      for (size_t t = 0; t < s.frames; ++t) {
        double dot = 0.0;
        for (size_t c = 0; c < s.channels; ++c) {
          const size_t i = (b * s.channels + c) * s.frames + t;
          dot += self.grad[i] * self.value[i];
        }
        for (size_t c = 0; c < s.channels; ++c) {
          const size_t i = (b * s.channels + c) * s.frames + t;
          px->grad[i] += self.value[i] * (self.grad[i] - dot);
        }
      }
  });
}

namespace {

// Shared by both normalizations. A "group" is the set of elements sharing
// statistics: a whole batch item (global) or one frame (channel).
Var Normalize(const Var &x, const Var &gain, const Var &bias, double eps, bool per_frame) {
  const Shape s = x.shape();
  Require(gain.size() == s.channels && bias.size() == s.channels,
          "normalization gain/bias need one value per channel");
  const size_t C = s.channels, T = s.frames;
  const size_t groups = s.batch * (per_frame ? T : 1);
  const size_t count = per_frame ? C : C * T;
  std::vector<double> xhat(s.size()), inv_std(groups), out(s.size());

  auto index = [&](size_t b, size_t c, size_t t) { return (b * C + c) * T + t; };
  auto for_group = [&](size_t grp, auto &&fn) {
    if (per_frame) {
      const size_t b = grp / T, t = grp % T;
      for (size_t c = 0; c < C; ++c) fn(index(b, c, t), c);
    } else {
      for (size_t c = 0; c < C; ++c)
        for (size_t t = 0; t < T; ++t) fn(index(grp, c, t), c);
    }
  };

  const double *xv = x.value().data();
  for (size_t g = 0; g < groups; ++g) {
    double mean = 0.0;
    for_group(g, [&](size_t i, size_t) { mean += xv[i]; });
    mean /= static_cast<double>(count);
    double var = 0.0;
    for_group(g, [&](size_t i, size_t) { var += (xv[i] - mean) * (xv[i] - mean); });
    var /= static_cast<double>(count);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[g] = is;
    for_group(g, [&](size_t i, size_t c) {
      xhat[i] = (xv[i] - mean) * is;
      out[i] = gain.value()[c] * xhat[i] + bias.value()[c];
    });
  }

  return MakeResult(s, std::move(out), {x, gain, bias},
                    [C, T, groups, count, per_frame, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)](Node &self) {
    Node *px = GradParent(self, 0), *pg = GradParent(self, 1), *pb = GradParent(self, 2);
    const Node &gn = *self.parents[1];
    auto index = [&](size_t b, size_t c, size_t t) { return (b * C + c) * T + t; };
    auto for_group = [&](size_t grp, auto &&fn) {
      if (per_frame) {
        const size_t b = grp / T, t = grp % T;
        for (size_t c = 0; c < C; ++c) fn(index(b, c, t), c);
      } else {
        for (size_t c = 0; c < C; ++c)
          for (size_t t = 0; t < T; ++t) fn(index(grp, c, t), c);
      }
    };
    for (size_t g = 0; g < groups; ++g) {
      double mean_d = 0.0, mean_dx = 0.0;
      for_group(g, [&](size_t i, size_t c) {
        const double gy = self.grad[i];
        if (pg) pg->grad[c] += gy * xhat[i];
        if (pb) pb->grad[c] += gy;
        const double d = gy * gn.value[c];
        mean_d += d;
        mean_dx += d * xhat[i];
      });
      if (!px) continue;
      mean_d /= static_cast<double>(count);
      mean_dx /= static_cast<double>(count);
      const double is = inv_std[g];
      for_group(g, [&](size_t i, size_t c) {
        const double d = self.grad[i] * gn.value[c];
        px->grad[i] += is * (d - mean_d - xhat[i] * mean_dx);
      });
    }
  });
}

}  // namespace

Var GlobalLayerNorm(const Var &x, const Var &gain, const Var &bias, double eps) {
  return Normalize(x, gain, bias, eps, false);
}

Var ChannelNorm(const Var &x, const Var &gain, const Var &bias, double eps) {
  return Normalize(x, gain, bias, eps, true);
}

Var Add(const Var &a, const Var &b) {
  Require(a.shape() == b.shape(), "add " + a.shape().str() + " + " + b.shape().str());
  std::vector<double> out(a.value().begin(), a.value().end());
  for (size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return MakeResult(a.shape(), std::move(out), {a, b}, [](Node &self) {
    for (size_t p = 0; p < 2; ++p)
      if (Node *n = GradParent(self, p))
        for (size_t i = 0; i < self.grad.size(); ++i) n->grad[i] += self.grad[i];
  });
}

Var Mul(const Var &a, const Var &b) {
  Require(a.shape() == b.shape(), "mul " + a.shape().str() + " * " + b.shape().str());
  std::vector<double> out(a.value().begin(), a.value().end());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return MakeResult(a.shape(), std::move(out), {a, b}, [](Node &self) {
    Node *pa = GradParent(self, 0), *pb = GradParent(self, 1);
    const Node &an = *self.parents[0], &bn = *self.parents[1];
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (pa) pa->grad[i] += self.grad[i] * bn.value[i];
      if (pb) pb->grad[i] += self.grad[i] * an.value[i];
    }
  });
}

Var Scale(const Var &x, double s) {
  std::vector<double> out(x.value().begin(), x.value().end());
  for (double &v : out) v *= s;
  return MakeResult(x.shape(), std::move(out), {x}, [s](Node &self) {
    if (Node *px = GradParent(self, 0))
      for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += s * self.grad[i];
  });
}

Var WeightedSum(const std::vector<Var> &xs, const std::vector<double> &weights) {
  Require(!xs.empty() && xs.size() == weights.size(), "weighted sum needs one weight per term");
  const Shape s = xs[0].shape();
  std::vector<double> out(s.size(), 0.0);
  for (size_t j = 0; j < xs.size(); ++j) {
    Require(xs[j].shape() == s, "weighted sum terms must share a shape");
    for (size_t i = 0; i < out.size(); ++i) out[i] += weights[j] * xs[j].value()[i];
  }
  return MakeResult(s, std::move(out), xs, [weights](Node &self) {
    for (size_t j = 0; j < weights.size(); ++j)
      if (Node *p = GradParent(self, j))
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += weights[j] * self.grad[i];
  });
}

Var ConcatChannels(const std::vector<Var> &xs) {
  Require(!xs.empty(), "concat of nothing");
  const size_t B = xs[0].shape().batch, T = xs[0].shape().frames;
  size_t C = 0;
  std::vector<size_t> offsets;
  for (const auto &x : xs) {
    Require(x.shape().batch == B && x.shape().frames == T,
            "concat operands must share batch and frames: " + x.shape().str());
    offsets.push_back(C);
    C += x.shape().channels;
  }
  Shape s{B, C, T};
  std::vector<double> out(s.size());
  for (size_t j = 0; j < xs.size(); ++j) {
    const size_t cj = xs[j].shape().channels;
    for (size_t b = 0; b < B; ++b)
      std::copy_n(xs[j].value().data() + b * cj * T, cj * T, out.data() + (b * C + offsets[j]) * T);
  }
  return MakeResult(s, std::move(out), xs, [B, C, T, offsets](Node &self) {
    for (size_t j = 0; j < offsets.size(); ++j) {
      Node *p = GradParent(self, j);
      if (!p) continue;
      const size_t cj = p->shape.channels;
      for (size_t b = 0; b < B; ++b) {
        const double *src = self.grad.data() + (b * C + offsets[j]) * T;
        double *dst = p->grad.data() + b * cj * T;
        for (size_t i = 0; i < cj * T; ++i) dst[i] += src[i];
      }
    }
  });
}

Var RepeatFrames(const Var &g, size_t frames) {
  const Shape gs = g.shape();
  Require(gs.frames == 1, "repeat expects a single frame, got " + gs.str());
  Shape s{gs.batch, gs.channels, frames};
  std::vector<double> out(s.size());
  for (size_t i = 0; i < gs.batch * gs.channels; ++i)
    std::fill_n(out.data() + i * frames, frames, g.value()[i]);
  return MakeResult(s, std::move(out), {g}, [frames](Node &self) {
    Node *p = GradParent(self, 0);
    if (!p) return;
    for (size_t i = 0; i < p->value.size(); ++i) {
      double acc = 0.0;
      for (size_t t = 0; t < frames; ++t) acc += self.grad[i * frames + t];
      p->grad[i] += acc;
    }
  });
}

Var MeanFrames(const Var &x) {
  const Shape s = x.shape();
  Shape os{s.batch, s.channels, 1};
  std::vector<double> out(os.size());
  for (size_t i = 0; i < os.size(); ++i) {
    double acc = 0.0;
    for (size_t t = 0; t < s.frames; ++t) acc += x.value()[i * s.frames + t];
    out[i] = acc / static_cast<double>(s.frames);
  }
  return MakeResult(os, std::move(out), {x}, [T = s.frames](Node &self) {
    Node *p = GradParent(self, 0);
    if (!p) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i] / static_cast<double>(T);
      for (size_t t = 0; t < T; ++t) p->grad[i * T + t] += g;
    }
  });
}

Var StackBatch(const std::vector<Var> &xs) {
  Require(!xs.empty(), "stack of nothing");
  const size_t C = xs[0].shape().channels, T = xs[0].shape().frames;
  size_t B = 0;
  std::vector<size_t> offsets;
  for (const auto &x : xs) {
    Require(x.shape().channels == C && x.shape().frames == T,
            "stacked items must share channels and frames");
    offsets.push_back(B * C * T);
    B += x.shape().batch;
  }
  Shape s{B, C, T};
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto &x : xs) out.insert(out.end(), x.value().begin(), x.value().end());
  return MakeResult(s, std::move(out), xs, [offsets](Node &self) {
    for (size_t j = 0; j < offsets.size(); ++j)
      if (Node *p = GradParent(self, j))
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[offsets[j] + i];
  });
}

Var SliceBatch(const Var &x, size_t index) {
  const Shape s = x.shape();
  Require(index < s.batch, "batch index " + std::to_string(index) + " outside " + s.str());
  const size_t n = s.channels * s.frames;
  std::vector<double> out(x.value().begin() + static_cast<std::ptrdiff_t>(index * n),
                          x.value().begin() + static_cast<std::ptrdiff_t>((index + 1) * n));
  return MakeResult({1, s.channels, s.frames}, std::move(out), {x}, [index, n](Node &self) {
    if (Node *p = GradParent(self, 0))
      for (size_t i = 0; i < n; ++i) p->grad[index * n + i] += self.grad[i];
  });
}

Var PadFrames(const Var &x, size_t left, size_t right) {
  const Shape s = x.shape();
  Shape os{s.batch, s.channels, s.frames + left + right};
  std::vector<double> out(os.size(), 0.0);
  for (size_t r = 0; r < s.batch * s.channels; ++r)
    std::copy_n(x.value().data() + r * s.frames, s.frames, out.data() + r * os.frames + left);
  return MakeResult(os, std::move(out), {x}, [s, os, left](Node &self) {
    Node *p = GradParent(self, 0);
    if (!p) return;
    for (size_t r = 0; r < s.batch * s.channels; ++r)
      for (size_t t = 0; t < s.frames; ++t) p->grad[r * s.frames + t] += self.grad[r * os.frames + left + t];
  });
}

Var SliceFrames(const Var &x, size_t start, size_t length) {
  const Shape s = x.shape();
  Require(start + length <= s.frames, "slice [" + std::to_string(start) + ", " +
                                          std::to_string(start + length) + ") outside " + s.str());
  Shape os{s.batch, s.channels, length};
  std::vector<double> out(os.size());
  for (size_t r = 0; r < s.batch * s.channels; ++r)
    std::copy_n(x.value().data() + r * s.frames + start, length, out.data() + r * length);
  return MakeResult(os, std::move(out), {x}, [s, start, length](Node &self) {
    Node *p = GradParent(self, 0);
    if (!p) return;
    for (size_t r = 0; r < s.batch * s.channels; ++r)
      for (size_t t = 0; t < length; ++t) p->grad[r * s.frames + start + t] += self.grad[r * length + t];
  });
}

Var Mean(const Var &x) {
  double acc = 0.0;
  for (double v : x.value()) acc += v;
  const double n = static_cast<double>(x.size());
  return MakeResult({1, 1, 1}, {acc / n}, {x}, [n](Node &self) {
    if (Node *p = GradParent(self, 0))
      for (double &g : p->grad) g += self.grad[0] / n;
  });
}

Var SiSdr(const Var &est, const Var &ref, double eps) {
  const Shape s = est.shape();
  Require(s == ref.shape(), "si_sdr shapes " + s.str() + " vs " + ref.shape().str());
  Require(s.channels == 1 && s.frames >= 2, "si_sdr expects (B x 1 x T) with T >= 2");
  const size_t B = s.batch, T = s.frames;
  constexpr double kDbPerNat = 10.0 / std::numbers::ln10;
  std::vector<double> out(B);
  // Cached per item: projection t = a*s and error e = s_hat - t.
  std::vector<double> proj(B * T), err(B * T), P(B), E(B);
  for (size_t b = 0; b < B; ++b) {
    const double *x = est.value().data() + b * T;
    const double *r = ref.value().data() + b * T;
    double mx = 0.0, mr = 0.0;
    for (size_t t = 0; t < T; ++t) {
      mx += x[t];
      mr += r[t];
    }
    mx /= static_cast<double>(T);
    mr /= static_cast<double>(T);
    double dot = 0.0, rr = 0.0;
    for (size_t t = 0; t < T; ++t) {
      dot += (x[t] - mx) * (r[t] - mr);
      rr += (r[t] - mr) * (r[t] - mr);
    }
    if (rr <= 0.0) throw Error(Errc::kSilentReference, "reference is zero after mean removal");
    const double a = dot / rr;
    double pe = 0.0, ee = 0.0;
    for (size_t t = 0; t < T; ++t) {
      const double tv = a * (r[t] - mr);
      const double ev = (x[t] - mx) - tv;
      proj[b * T + t] = tv;
      err[b * T + t] = ev;
      pe += tv * tv;
      ee += ev * ev;
    }
    P[b] = pe;
    E[b] = ee;
    out[b] = kDbPerNat * (std::log(pe) - std::log(ee + eps));
  }
  return MakeResult({B, 1, 1}, std::move(out), {est, ref},
                    [B, T, eps, proj = std::move(proj), err = std::move(err), P = std::move(P),
                     E = std::move(E)](Node &self) {
    Node *px = GradParent(self, 0);
    if (!px) return;
    for (size_t b = 0; b < B; ++b) {
      const double g = self.grad[b] * kDbPerNat;
      const double cp = 2.0 / P[b], ce = 2.0 / (E[b] + eps);
      // The projection and error are zero-mean, so the mean-removal
      // Jacobian leaves this gradient unchanged.
      for (size_t t = 0; t < T; ++t)
        px->grad[b * T + t] += g * (cp * proj[b * T + t] - ce * err[b * T + t]);
    }
  });
}

Var CrossEntropy(const Var &logits, std::span<const int> labels) {
  const Shape s = logits.shape();
  Require(s.frames == 1, "cross entropy expects (B x C x 1) logits");
  if (labels.size() != s.batch)
    throw Error(Errc::kShapeMismatch, "one label per batch item is required");
  const size_t B = s.batch, C = s.channels;
  std::vector<double> prob(B * C);
  double loss = 0.0;
  for (size_t b = 0; b < B; ++b) {
    if (labels[b] < 0 || static_cast<size_t>(labels[b]) >= C)
      throw Error(Errc::kIndexOutOfRange,
                  "label " + std::to_string(labels[b]) + " for " + std::to_string(C) + " classes");
    const double *z = logits.value().data() + b * C;
    const double mx = *std::max_element(z, z + C);
    double sum = 0.0;
    for (size_t c = 0; c < C; ++c) sum += std::exp(z[c] - mx);
    const double log_z = mx + std::log(sum);
    for (size_t c = 0; c < C; ++c) prob[b * C + c] = std::exp(z[c] - log_z);
    loss += log_z - z[labels[b]];
  }
  loss /= static_cast<double>(B);
  std::vector<int> lab(labels.begin(), labels.end());
  return MakeResult({1, 1, 1}, {loss}, {logits},
                    [B, C, lab = std::move(lab), prob = std::move(prob)](Node &self) {
    Node *p = GradParent(self, 0);
    if (!p) return;
    const double g = self.grad[0] / static_cast<double>(B);
    for (size_t b = 0; b < B; ++b)
      for (size_t c = 0; c < C; ++c)
        p->grad[b * C + c] += g * (prob[b * C + c] - (static_cast<int>(c) == lab[b] ? 1.0 : 0.0));
  });
}

}  // namespace spex::nn
