// core/src/model.cc

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

#include "spex/model.h"

#include <cmath>
#include <set>

#include "spex/error.h"
#include "spex/rng.h"

namespace spex {
namespace {

using nn::ConvSpec;
using nn::Shape;
using nn::Var;

void RequireRange(bool ok, const std::string &what) {
  if (!ok) throw Error(Errc::kRangeError, what);
}

ConvSpec Pointwise(std::size_t in, std::size_t out) {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

std::vector<double> UniformValues(std::size_t n, double bound, Rng &rng) {
  std::vector<double> v(n);
  for (double &x : v) x = rng.Uniform(-bound, bound);
  return v;
}

}  // namespace

void SpexConfig::Validate() const {
  RequireRange(N > 0 && O > 0 && P > 0 && Q > 0 && B > 0 && R > 0 && D > 0 && n_speakers > 0 &&
                   lstm_hidden > 0 && speaker_hidden > 0,
               "model sizes must be positive");
  RequireRange(L1 >= 2 && L1 % 2 == 0, "L1 must be even and at least 2");
  RequireRange(L2 >= L1 && L3 >= L1, "L2 and L3 must be at least L1");
  RequireRange(alpha >= 0 && beta >= 0 && alpha + beta < 1.0, "need alpha, beta >= 0 and alpha + beta < 1");
  RequireRange(gamma >= 0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  RequireRange(Q % 2 == 1, "depthwise kernel Q must be odd for centered padding");
}

SpexConfig MicroConfig() {
  SpexConfig c;
  c.N = 16;
  c.O = 16;
  c.P = 32;
  c.Q = 3;
  c.B = 2;
  c.R = 1;
  c.D = 8;
  c.n_speakers = 4;
  c.lstm_hidden = 16;
  c.speaker_hidden = 16;
  return c;
}

std::size_t EmbeddingFrames(const SpexConfig &config, std::size_t length) {
  const std::size_t s = config.stride();
  if (length < config.L1) return 0;
  return (length - config.L1 + s - 1) / s + 1;
}

Var FeatureTensor(const FeatureFrameSequence &features) {
  const auto T = static_cast<std::size_t>(features.num_frames);
  if (T == 0) throw Error(Errc::kEmptyAfterVad, "no frames for the speaker encoder");
  std::vector<double> v(kFeatureDim * T);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < kFeatureDim; ++d)
      v[d * T + t] = features.at(static_cast<int>(t), static_cast<int>(d));
  return Var::Constant({1, kFeatureDim, T}, std::move(v));
}

Var TcnBlock::operator()(const Var &x, const Var &residual) const {
  Var h = input_conv(x);
  h = nn::PRelu(h, prelu1);
  h = nn::GlobalLayerNorm(h, norm1_gain, norm1_bias);
  h = depthwise(h);
  h = nn::PRelu(h, prelu2);
  h = nn::GlobalLayerNorm(h, norm2_gain, norm2_bias);
  h = output_conv(h);
  return nn::Add(residual, h);
}

Var SpexModel::AddParam(const std::string &name, Shape shape, std::vector<double> values) {
  Var v = Var::Parameter(shape, std::move(values));
  params_.push_back({name, v});
  return v;
}

Var SpexModel::MakeConst(const std::string &name, std::size_t channels, double fill) {
  return AddParam(name, {1, channels, 1}, std::vector<double>(channels, fill));
}

ConvLayer SpexModel::MakeConv(const std::string &name, const ConvSpec &spec, std::uint64_t &stream) {
  spec.Validate();
  Rng rng(seed_, stream++);
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.in_channels / spec.groups * spec.kernel));
  ConvLayer layer;
  layer.spec = spec;
  const Shape ws = spec.WeightShape();
  layer.weight = AddParam(name + ".weight", ws, UniformValues(ws.size(), bound, rng));
  layer.bias = AddParam(name + ".bias", {1, spec.out_channels, 1}, UniformValues(spec.out_channels, bound, rng));
  return layer;
}

nn::LstmWeights SpexModel::MakeLstm(const std::string &name, std::size_t input, std::size_t hidden,
                                    std::uint64_t &stream) {
  Rng rng(seed_, stream++);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  nn::LstmWeights w;
  w.input = AddParam(name + ".w_ih", {4 * hidden, input, 1}, UniformValues(4 * hidden * input, bound, rng));
  w.recurrent = AddParam(name + ".w_hh", {4 * hidden, hidden, 1}, UniformValues(4 * hidden * hidden, bound, rng));
  w.bias = AddParam(name + ".bias", {1, 4 * hidden, 1}, UniformValues(4 * hidden, bound, rng));
  return w;
}

SpexModel::SpexModel(const SpexConfig &config, std::uint64_t seed) : config_(config), seed_(seed) {
  config_.Validate();
  const SpexConfig &c = config_;
  std::uint64_t stream = 0;
  const std::size_t lengths[3] = {c.L1, c.L2, c.L3};

  for (int i = 0; i < 3; ++i) {
    ConvSpec s;
    s.in_channels = 1;
    s.out_channels = c.N;
    s.kernel = lengths[i];
    s.stride = c.stride();
    encoders_[i] = MakeConv("speech_encoder.conv" + std::to_string(i + 1), s, stream);
  }

  lstm_fwd_ = MakeLstm("speaker_encoder.blstm.forward", kFeatureDim, c.lstm_hidden, stream);
  lstm_bwd_ = MakeLstm("speaker_encoder.blstm.backward", kFeatureDim, c.lstm_hidden, stream);
  speaker_hidden_ = MakeConv("speaker_encoder.hidden", Pointwise(2 * c.lstm_hidden, c.speaker_hidden), stream);
  speaker_projection_ = MakeConv("speaker_encoder.projection", Pointwise(c.speaker_hidden, c.D), stream);
  speaker_classifier_ = MakeConv("speaker_encoder.classifier", Pointwise(c.D, c.n_speakers), stream);

  input_norm_gain_ = MakeConst("extractor.input_norm.gain", 3 * c.N, 1.0);
  input_norm_bias_ = MakeConst("extractor.input_norm.bias", 3 * c.N, 0.0);
  bottleneck_ = MakeConv("extractor.bottleneck", Pointwise(3 * c.N, c.O), stream);
  for (std::size_t r = 0; r < c.R; ++r) {
    for (std::size_t b = 0; b < c.B; ++b) {
      const std::string name = "extractor.stack" + std::to_string(r) + ".block" + std::to_string(b);
      const std::size_t in = b == 0 ? c.O + c.D : c.O;
      TcnBlock block;
      block.input_conv = MakeConv(name + ".input_conv", Pointwise(in, c.P), stream);
      block.prelu1 = MakeConst(name + ".prelu1", c.P, 0.25);
      block.norm1_gain = MakeConst(name + ".norm1.gain", c.P, 1.0);
      block.norm1_bias = MakeConst(name + ".norm1.bias", c.P, 0.0);
      ConvSpec dw;
      dw.in_channels = c.P;
      dw.out_channels = c.P;
      dw.groups = c.P;
      dw.kernel = c.Q;
      dw.dilation = std::size_t{1} << b;
      dw.pad_left = dw.pad_right = dw.dilation * (c.Q - 1) / 2;
      block.depthwise = MakeConv(name + ".depthwise", dw, stream);
      block.prelu2 = MakeConst(name + ".prelu2", c.P, 0.25);
      block.norm2_gain = MakeConst(name + ".norm2.gain", c.P, 1.0);
      block.norm2_bias = MakeConst(name + ".norm2.bias", c.P, 0.0);
      block.output_conv = MakeConv(name + ".output_conv", Pointwise(c.P, c.O), stream);
      blocks_.push_back(std::move(block));
    }
  }
  for (int i = 0; i < 3; ++i)
    mask_heads_[i] = MakeConv("extractor.mask" + std::to_string(i + 1), Pointwise(c.O, c.N), stream);

  for (int i = 0; i < 3; ++i) {
    ConvSpec s;
    s.in_channels = c.N;
    s.out_channels = 1;
    s.kernel = lengths[i];
    s.stride = c.stride();
    decoder_spec_[i] = s;
    Rng rng(seed_, stream++);
    const double bound = 1.0 / std::sqrt(static_cast<double>(lengths[i]));
    const std::string name = "speech_decoder.deconv" + std::to_string(i + 1);
    decoder_weight_[i] = AddParam(name + ".weight", {c.N, 1, lengths[i]}, UniformValues(c.N * lengths[i], bound, rng));
    decoder_bias_[i] = AddParam(name + ".bias", {1, 1, 1}, UniformValues(1, bound, rng));
  }
}

MultiScaleEmbedding SpexModel::SpeechEncode(const Var &mixture) const {
  const SpexConfig &c = config_;
  const Shape s = mixture.shape();
  if (s.channels != 1) throw Error(Errc::kShapeMismatch, "mixture must be (B x 1 x T), got " + s.str());
  if (s.frames < c.L3)
    throw Error(Errc::kTooShort, "mixture of " + std::to_string(s.frames) + " samples is shorter than L3 = " +
                                     std::to_string(c.L3));
  MultiScaleEmbedding e;
  e.frames = EmbeddingFrames(c, s.frames);
  e.padded_length = (e.frames - 1) * c.stride() + c.L1;
  const std::size_t lengths[3] = {c.L1, c.L2, c.L3};
  Var *outs[3] = {&e.e1, &e.e2, &e.e3};
  for (int i = 0; i < 3; ++i) {
    Var padded = nn::PadFrames(mixture, 0, e.padded_length - s.frames + lengths[i] - c.L1);
    *outs[i] = nn::Relu(encoders_[i](padded));
  }
  return e;
}

SpeakerEmbedding SpexModel::SpeakerEncode(const std::vector<Var> &references) const {
  if (references.empty()) throw Error(Errc::kShapeMismatch, "speaker encoder needs at least one reference");
  std::vector<Var> pooled;
  for (const Var &ref : references) {
    if (ref.shape().frames == 0) throw Error(Errc::kEmptyAfterVad, "reference has no frames");
    if (ref.shape().channels != kFeatureDim || ref.shape().batch != 1)
      throw Error(Errc::kShapeMismatch, "reference features must be (1 x 60 x frames), got " + ref.shape().str());
    Var h = nn::BiLstm(ref, lstm_fwd_, lstm_bwd_);
    h = nn::Relu(speaker_hidden_(h));
    h = speaker_projection_(h);
    pooled.push_back(nn::MeanFrames(h));
  }
  SpeakerEmbedding out;
  out.vector = pooled.size() == 1 ? pooled[0] : nn::StackBatch(pooled);
  out.logits = speaker_classifier_(out.vector);
  return out;
}

MaskSet SpexModel::ExtractMasks(const MultiScaleEmbedding &e, const SpeakerEmbedding &speaker) const {
  const SpexConfig &c = config_;
  const Shape es = e.e1.shape();
  if (!(e.e2.shape() == es) || !(e.e3.shape() == es) || es.channels != c.N)
    throw Error(Errc::kShapeMismatch, "embedding scales must all be (B x N x K)");
  if (speaker.vector.shape().batch != es.batch || speaker.vector.shape().channels != c.D)
    throw Error(Errc::kShapeMismatch, "speaker embedding " + speaker.vector.shape().str() +
                                          " does not match batch " + std::to_string(es.batch));
  Var x = nn::ConcatChannels({e.e1, e.e2, e.e3});
  x = nn::ChannelNorm(x, input_norm_gain_, input_norm_bias_);
  x = bottleneck_(x);
  const Var g = nn::RepeatFrames(speaker.vector, es.frames);
  for (std::size_t r = 0; r < c.R; ++r) {
    for (std::size_t b = 0; b < c.B; ++b) {
      const TcnBlock &block = blocks_[r * c.B + b];
      x = b == 0 ? block(nn::ConcatChannels({x, g}), x) : block(x, x);
    }
  }
  MaskSet m;
  m.m1 = nn::Sigmoid(mask_heads_[0](x));
  m.m2 = nn::Sigmoid(mask_heads_[1](x));
  m.m3 = nn::Sigmoid(mask_heads_[2](x));
  return m;
}

ModulatedResponses SpexModel::ApplyMasks(const MultiScaleEmbedding &e, const MaskSet &m) {
  return {nn::Mul(m.m1, e.e1), nn::Mul(m.m2, e.e2), nn::Mul(m.m3, e.e3)};
}

ExtractionResult SpexModel::SpeechDecode(const ModulatedResponses &r, std::size_t length) const {
  const Var *in[3] = {&r.r1, &r.r2, &r.r3};
  Var out[3];
  for (int i = 0; i < 3; ++i) {
    Var full = nn::ConvTranspose1d(*in[i], decoder_weight_[i], decoder_bias_[i], decoder_spec_[i]);
    if (full.shape().frames < length)
      throw Error(Errc::kShapeMismatch, "decoded " + std::to_string(full.shape().frames) +
                                            " samples, need " + std::to_string(length));
    out[i] = nn::SliceFrames(full, 0, length);
  }
  ExtractionResult res{out[0], out[1], out[2], Var()};
  const double a = config_.alpha, b = config_.beta;
  res.sw = nn::WeightedSum({res.s1, res.s2, res.s3}, {1.0 - a - b, a, b});
  return res;
}

ForwardResult SpexModel::Forward(const Var &mixture, const std::vector<Var> &references) const {
  ForwardResult f;
  f.embedding = SpeechEncode(mixture);
  f.speaker = SpeakerEncode(references);
  f.masks = ExtractMasks(f.embedding, f.speaker);
  f.extraction = SpeechDecode(ApplyMasks(f.embedding, f.masks), mixture.shape().frames);
  return f;
}

std::vector<Var> SpexModel::ParameterVars() const {
  std::vector<Var> v;
  for (const auto &p : params_) v.push_back(p.value);
  return v;
}

std::size_t SpexModel::NumParameters() const {
  std::size_t n = 0;
  for (const auto &p : params_) n += p.value.size();
  return n;
}

std::vector<std::vector<double>> SpexModel::SnapshotValues() const {
  std::vector<std::vector<double>> out;
  for (const auto &p : params_) out.emplace_back(p.value.value().begin(), p.value.value().end());
  return out;
}

void SpexModel::RestoreValues(const std::vector<std::vector<double>> &values) {
  if (values.size() != params_.size()) throw Error(Errc::kShapeMismatch, "snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != params_[i].value.size())
      throw Error(Errc::kShapeMismatch, "snapshot mismatch for " + params_[i].name);
    params_[i].value.mutable_value() = values[i];
  }
}

std::size_t SpexModel::ReceptiveField() const {
  std::size_t field = 1;
  for (const auto &block : blocks_)
    field += block.depthwise.spec.dilation * (block.depthwise.spec.kernel - 1);
  return field;
}

}  // namespace spex
