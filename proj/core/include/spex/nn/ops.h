// core/include/spex/nn/ops.h

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

#ifndef SPEX_NN_OPS_H_
#define SPEX_NN_OPS_H_

#include <span>
#include <vector>

#include "spex/nn/tensor.h"

namespace spex::nn {

inline constexpr double kNormEps = 1e-8;

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t groups = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  /// floor((frames + pads - dilation*(kernel-1) - 1) / stride) + 1, or 0
  /// when the padded input is shorter than the dilated kernel.
  std::size_t OutFrames(std::size_t frames) const;
  Shape WeightShape() const { return {out_channels, in_channels / groups, kernel}; }
  void Validate() const;
  // weights + biases
  std::size_t NumParameters(bool with_bias = true) const;
};

/// x (B x in x T), weight (out x in/groups x kernel), bias (1 x out x 1) or
/// undefined.
Var Conv1d(const Var &x, const Var &weight, const Var &bias, const ConvSpec &spec);

/// Transposed convolution with overlap-add; output frames are
/// (T-1)*stride + kernel. weight is (in x out x kernel), so a Conv1d weight
/// reused here gives the adjoint map. spec.groups must be 1.
Var ConvTranspose1d(const Var &x, const Var &weight, const Var &bias, const ConvSpec &spec);

Var Relu(const Var &x);
/// Per-channel slope, shape (1 x C x 1).
Var PRelu(const Var &x, const Var &slope);
Var Sigmoid(const Var &x);
/// Softmax over the channel axis.
Var Softmax(const Var &x);

/// Statistics over (channels x frames) per batch item; per-channel gain and
/// bias of shape (1 x C x 1).
Var GlobalLayerNorm(const Var &x, const Var &gain, const Var &bias, double eps = kNormEps);
/// Statistics over channels per frame.
Var ChannelNorm(const Var &x, const Var &gain, const Var &bias, double eps = kNormEps);

Var Add(const Var &a, const Var &b);
Var Mul(const Var &a, const Var &b);
Var Scale(const Var &x, double s);
Var WeightedSum(const std::vector<Var> &xs, const std::vector<double> &weights);

Var ConcatChannels(const std::vector<Var> &xs);
/// (B x D x 1) -> (B x D x frames).
Var RepeatFrames(const Var &g, std::size_t frames);
/// Mean over frames: (B x C x T) -> (B x C x 1).
Var MeanFrames(const Var &x);
/// Concatenates along the batch axis.
Var StackBatch(const std::vector<Var> &xs);
/// Item `index` of the batch as a (1 x C x T) value.
Var SliceBatch(const Var &x, std::size_t index);
Var PadFrames(const Var &x, std::size_t left, std::size_t right);
Var SliceFrames(const Var &x, std::size_t start, std::size_t length);

/// Mean of all elements as a (1 x 1 x 1) value.
Var Mean(const Var &x);

/// Per-item SI-SDR in dB for est, ref of shape (B x 1 x T). Both are
/// mean-removed; eps is added to the error energy. The gradient flows to
/// est only. Throws kSilentReference.
Var SiSdr(const Var &est, const Var &ref, double eps = 1e-8);

/// Mean over the batch of -log softmax(logits)[label]; logits (B x C x 1).
/// Throws kIndexOutOfRange.
Var CrossEntropy(const Var &logits, std::span<const int> labels);

}  // namespace spex::nn

#endif  // SPEX_NN_OPS_H_
