// core/include/spex/model.h

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

#ifndef SPEX_MODEL_H_
#define SPEX_MODEL_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spex/features.h"
#include "spex/nn/lstm.h"
#include "spex/nn/ops.h"
#include "spex/nn/tensor.h"

namespace spex {

/// Network hyperparameters. Defaults are the best reported configuration.
struct SpexConfig {
  std::size_t N = 256;   // filters per encoder scale
  std::size_t L1 = 20;   // short window; stride is L1/2
  std::size_t L2 = 80;   // middle window
  std::size_t L3 = 160;  // long window
  std::size_t O = 256;   // extractor residual width
  std::size_t P = 512;   // depthwise channels
  std::size_t Q = 3;     // depthwise kernel
  std::size_t B = 8;     // TCN blocks per stack
  std::size_t R = 4;     // stacks
  std::size_t D = 400;   // speaker embedding dim
  std::size_t n_speakers = 101;
  double alpha = 0.1;
  double beta = 0.1;
  double gamma = 0.2;
  // Speaker encoder widths.
  std::size_t lstm_hidden = 256;
  std::size_t speaker_hidden = 256;
  FeatureOptions features;

  std::size_t stride() const { return L1 / 2; }
  /// Throws kRangeError on violated invariants.
  void Validate() const;
};

/// Micro configuration used for gradient checks and overfit runs.
SpexConfig MicroConfig();

/// E1, E2, E3 of shape (B x N x K), nonnegative.
struct MultiScaleEmbedding {
  nn::Var e1, e2, e3;
  std::size_t frames = 0;         // K
  std::size_t padded_length = 0;  // T after alignment padding
};

struct SpeakerEmbedding {
  nn::Var vector;  // (B x D x 1)
  nn::Var logits;  // (B x n_speakers x 1)
};

struct MaskSet {
  nn::Var m1, m2, m3;  // (B x N x K) in [0, 1]
};

struct ModulatedResponses {
  nn::Var r1, r2, r3;
};

/// Per-scale reconstructions (B x 1 x T) trimmed to the mixture length and
/// the weighted sum (1-alpha-beta) s1 + alpha s2 + beta s3.
struct ExtractionResult {
  nn::Var s1, s2, s3, sw;
};

struct ForwardResult {
  MultiScaleEmbedding embedding;
  SpeakerEmbedding speaker;
  MaskSet masks;
  ExtractionResult extraction;
};

struct NamedParameter {
  std::string name;
  nn::Var value;
};

/// Trainable 1-D convolution layer.
struct ConvLayer {
  nn::ConvSpec spec;
  nn::Var weight;
  nn::Var bias;

  nn::Var operator()(const nn::Var &x) const { return nn::Conv1d(x, weight, bias, spec); }
};

/// 1x1 conv -> PReLU -> gLN -> dilated depthwise conv -> PReLU -> gLN ->
/// 1x1 conv, plus the residual path.
struct TcnBlock {
  ConvLayer input_conv;
  nn::Var prelu1;
  nn::Var norm1_gain, norm1_bias;
  ConvLayer depthwise;
  nn::Var prelu2;
  nn::Var norm2_gain, norm2_bias;
  ConvLayer output_conv;

  // `x` may carry the speaker embedding in channels [O, O+D); the residual
  // is added to the first O channels.
  nn::Var operator()(const nn::Var &x, const nn::Var &residual) const;
};

class SpexModel {
 public:
  explicit SpexModel(const SpexConfig &config, std::uint64_t seed = 0);
  // Layers alias the parameter registry, so copies would share storage.
  SpexModel(const SpexModel &) = delete;
  SpexModel &operator=(const SpexModel &) = delete;
  SpexModel(SpexModel &&) = default;
  SpexModel &operator=(SpexModel &&) = default;

  const SpexConfig &config() const { return config_; }

  /// mixture (B x 1 x T) with T >= L3. Throws kTooShort.
  MultiScaleEmbedding SpeechEncode(const nn::Var &mixture) const;
  /// One (1 x 60 x frames) feature tensor per batch item. Throws kEmptyAfterVad.
  SpeakerEmbedding SpeakerEncode(const std::vector<nn::Var> &references) const;
  MaskSet ExtractMasks(const MultiScaleEmbedding &embedding, const SpeakerEmbedding &speaker) const;
  static ModulatedResponses ApplyMasks(const MultiScaleEmbedding &embedding, const MaskSet &masks);
  ExtractionResult SpeechDecode(const ModulatedResponses &responses, std::size_t length) const;
  ForwardResult Forward(const nn::Var &mixture, const std::vector<nn::Var> &references) const;

  std::vector<NamedParameter> &parameters() { return params_; }
  const std::vector<NamedParameter> &parameters() const { return params_; }
  std::vector<nn::Var> ParameterVars() const;
  std::size_t NumParameters() const;
  std::vector<std::vector<double>> SnapshotValues() const;
  void RestoreValues(const std::vector<std::vector<double>> &values);

  /// Frames of extractor input that can influence one mask frame, computed
  /// from the instantiated depthwise layers.
  std::size_t ReceptiveField() const;

 private:
  nn::Var AddParam(const std::string &name, nn::Shape shape, std::vector<double> values);
  ConvLayer MakeConv(const std::string &name, const nn::ConvSpec &spec, std::uint64_t &stream);
  nn::Var MakeConst(const std::string &name, std::size_t channels, double fill);
  nn::LstmWeights MakeLstm(const std::string &name, std::size_t input, std::size_t hidden,
                           std::uint64_t &stream);

  SpexConfig config_;
  std::uint64_t seed_;
  std::vector<NamedParameter> params_;

  ConvLayer encoders_[3];
  nn::Var decoder_weight_[3];
  nn::Var decoder_bias_[3];
  nn::ConvSpec decoder_spec_[3];

  nn::LstmWeights lstm_fwd_, lstm_bwd_;
  ConvLayer speaker_hidden_;
  ConvLayer speaker_projection_;
  ConvLayer speaker_classifier_;

  nn::Var input_norm_gain_, input_norm_bias_;
  ConvLayer bottleneck_;
  std::vector<TcnBlock> blocks_;  // R * B, stack-major
  ConvLayer mask_heads_[3];
};

/// (1 x 60 x frames) tensor from a feature sequence.
nn::Var FeatureTensor(const FeatureFrameSequence &features);

/// Mixture frame count K = 2(T - L1)/L1 + 1 after alignment padding.
std::size_t EmbeddingFrames(const SpexConfig &config, std::size_t length);

}  // namespace spex

#endif  // SPEX_MODEL_H_
