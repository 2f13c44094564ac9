// core/src/features.cc

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

#include "spex/features.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>

#include "spex/error.h"

namespace spex {
namespace {

constexpr int kFftSize = 512;
constexpr int kNumBins = kFftSize / 2 + 1;
constexpr int kNumMel = 40;
constexpr int kNumCepstra = 19;
constexpr int kBaseDim = kNumCepstra + 1;
constexpr double kLogFloor = 1e-10;

double HzToMel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

struct FftwFree {
  void operator()(void *p) const { fftw_free(p); }
};

// Window, filterbank and an FFTW plan shared by every call. Execution with
// the new-array interface is thread safe; planning happens once.
class MfccTables {
 public:
  MfccTables()
      : in_(static_cast<double *>(fftw_malloc(sizeof(double) * kFftSize))),
        out_(static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * kNumBins))) {
    plan_ = fftw_plan_dft_r2c_1d(kFftSize, in_.get(), out_.get(), FFTW_ESTIMATE);
    window_.resize(kFrameLength);
    for (int n = 0; n < kFrameLength; ++n)
      window_[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kFrameLength - 1));

    const double mel_lo = HzToMel(0.0), mel_hi = HzToMel(kModelSampleRate / 2.0);
    std::vector<double> edges(kNumMel + 2);
    for (int m = 0; m < kNumMel + 2; ++m)
      edges[m] = mel_lo + (mel_hi - mel_lo) * m / (kNumMel + 1);
    filters_.assign(static_cast<std::size_t>(kNumMel) * kNumBins, 0.0);
    for (int k = 0; k < kNumBins; ++k) {
      const double mel = HzToMel(static_cast<double>(k) * kModelSampleRate / kFftSize);
      for (int m = 0; m < kNumMel; ++m) {
        const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
        double w = 0.0;
        if (mel > left && mel <= center) w = (mel - left) / (center - left);
        else if (mel > center && mel < right) w = (right - mel) / (right - center);
        filters_[static_cast<std::size_t>(m) * kNumBins + k] = w;
      }
    }
    dct_.resize(static_cast<std::size_t>(kNumCepstra) * kNumMel);
    for (int j = 1; j <= kNumCepstra; ++j)
      for (int m = 0; m < kNumMel; ++m)
        dct_[static_cast<std::size_t>(j - 1) * kNumMel + m] =
            std::sqrt(2.0 / kNumMel) * std::cos(std::numbers::pi * j * (m + 0.5) / kNumMel);
  }
  ~MfccTables() { fftw_destroy_plan(plan_); }
  MfccTables(const MfccTables &) = delete;
  MfccTables &operator=(const MfccTables &) = delete;

  // Writes 19 cepstra followed by log-energy.
  void Frame(const double *samples, double *out) const {
    std::unique_ptr<double, FftwFree> buf(static_cast<double *>(fftw_malloc(sizeof(double) * kFftSize)));
    std::unique_ptr<fftw_complex, FftwFree> spec(
        static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * kNumBins)));
    double energy = 0.0;
    for (int n = 0; n < kFrameLength; ++n) {
      buf.get()[n] = samples[n] * window_[n];
      energy += buf.get()[n] * buf.get()[n];
    }
    std::fill(buf.get() + kFrameLength, buf.get() + kFftSize, 0.0);
    fftw_execute_dft_r2c(plan_, buf.get(), spec.get());

    double mag[kNumBins];
    for (int k = 0; k < kNumBins; ++k) mag[k] = std::hypot(spec.get()[k][0], spec.get()[k][1]);
    double logmel[kNumMel];
    for (int m = 0; m < kNumMel; ++m) {
      const double *f = &filters_[static_cast<std::size_t>(m) * kNumBins];
      double acc = 0.0;
      for (int k = 0; k < kNumBins; ++k) acc += f[k] * mag[k];
      logmel[m] = std::log(std::max(acc, kLogFloor));
    }
    for (int j = 0; j < kNumCepstra; ++j) {
      const double *d = &dct_[static_cast<std::size_t>(j) * kNumMel];
      double acc = 0.0;
      for (int m = 0; m < kNumMel; ++m) acc += d[m] * logmel[m];
      out[j] = acc;
    }
    out[kNumCepstra] = std::log(std::max(energy, kLogFloor));
  }

 private:
  std::unique_ptr<double, FftwFree> in_;
  std::unique_ptr<fftw_complex, FftwFree> out_;
  fftw_plan plan_;
  std::vector<double> window_;
  std::vector<double> filters_;
  std::vector<double> dct_;
};

const MfccTables &Tables() {
  static const MfccTables tables;
  return tables;
}

}  // namespace

int NumFrames(std::size_t num_samples) {
  if (num_samples < static_cast<std::size_t>(kFrameLength)) return 0;
  return static_cast<int>((num_samples - kFrameLength) / kFrameShift) + 1;
}

std::vector<double> ComputeDeltas(const std::vector<double> &x, int num_frames, int dim) {
  std::vector<double> d(x.size(), 0.0);
  constexpr int kWindow = 2;
  constexpr double kNorm = 2.0 * (1 * 1 + 2 * 2);
  for (int t = 0; t < num_frames; ++t) {
    for (int n = 1; n <= kWindow; ++n) {
      const int ahead = std::min(t + n, num_frames - 1);
      const int behind = std::max(t - n, 0);
      for (int c = 0; c < dim; ++c) {
        d[static_cast<std::size_t>(t) * dim + c] +=
            n * (x[static_cast<std::size_t>(ahead) * dim + c] -
                 x[static_cast<std::size_t>(behind) * dim + c]);
      }
    }
    for (int c = 0; c < dim; ++c) d[static_cast<std::size_t>(t) * dim + c] /= kNorm;
  }
  return d;
}

void SlidingCmn(std::vector<double> &x, int num_frames, int dim, int window) {
  if (num_frames == 0) return;
  const int w = std::min(window, num_frames);
  std::vector<double> prefix(static_cast<std::size_t>(num_frames + 1) * dim, 0.0);
  for (int t = 0; t < num_frames; ++t)
    for (int c = 0; c < dim; ++c)
      prefix[static_cast<std::size_t>(t + 1) * dim + c] =
          prefix[static_cast<std::size_t>(t) * dim + c] + x[static_cast<std::size_t>(t) * dim + c];
  std::vector<double> out(x.size());
  for (int t = 0; t < num_frames; ++t) {
    int start = std::clamp(t - w / 2, 0, num_frames - w);
    int end = start + w;
    for (int c = 0; c < dim; ++c) {
      const double mean = (prefix[static_cast<std::size_t>(end) * dim + c] -
                           prefix[static_cast<std::size_t>(start) * dim + c]) / w;
      out[static_cast<std::size_t>(t) * dim + c] = x[static_cast<std::size_t>(t) * dim + c] - mean;
    }
  }
  x = std::move(out);
}

FeatureFrameSequence MfccFeatures(const Waveform &wave, const FeatureOptions &opts) {
  RequireModelRate(wave);
  const int frames = NumFrames(wave.size());
  if (frames == 0)
    throw Error(Errc::kTooShort, wave.source_id + ": " + std::to_string(wave.size()) +
                                     " samples, need at least " + std::to_string(kFrameLength));
  const MfccTables &tables = Tables();
  std::vector<double> base(static_cast<std::size_t>(frames) * kBaseDim);
  for (int t = 0; t < frames; ++t)
    tables.Frame(wave.samples.data() + static_cast<std::size_t>(t) * kFrameShift,
                 &base[static_cast<std::size_t>(t) * kBaseDim]);

  std::vector<double> d1 = ComputeDeltas(base, frames, kBaseDim);
  std::vector<double> d2 = ComputeDeltas(d1, frames, kBaseDim);

  FeatureFrameSequence f;
  f.num_frames = frames;
  f.frames.resize(static_cast<std::size_t>(frames) * kFeatureDim);
  f.log_energy.resize(frames);
  for (int t = 0; t < frames; ++t) {
    for (int c = 0; c < kBaseDim; ++c) {
      const std::size_t src = static_cast<std::size_t>(t) * kBaseDim + c;
      f.at(t, c) = base[src];
      f.at(t, kBaseDim + c) = d1[src];
      f.at(t, 2 * kBaseDim + c) = d2[src];
    }
    f.log_energy[t] = base[static_cast<std::size_t>(t) * kBaseDim + kNumCepstra];
  }
  if (opts.apply_cmn) SlidingCmn(f.frames, frames, kFeatureDim, opts.cmn_window_frames);
  return f;
}

std::vector<bool> EnergyVad(const FeatureFrameSequence &features, double threshold_db) {
  std::vector<bool> keep(features.num_frames, false);
  if (features.num_frames == 0) return keep;
  auto peak_it = std::max_element(features.log_energy.begin(), features.log_energy.end());
  const double floor = *peak_it - threshold_db / 10.0 * std::numbers::ln10;
  for (int t = 0; t < features.num_frames; ++t) keep[t] = features.log_energy[t] >= floor;
  keep[static_cast<std::size_t>(peak_it - features.log_energy.begin())] = true;
  return keep;
}

FeatureFrameSequence SelectFrames(const FeatureFrameSequence &features, const std::vector<bool> &keep) {
  FeatureFrameSequence out;
  out.frame_shift_ms = features.frame_shift_ms;
  out.frame_length_ms = features.frame_length_ms;
  for (int t = 0; t < features.num_frames; ++t) {
    if (!keep[t]) continue;
    auto row = features.frames.begin() + static_cast<std::ptrdiff_t>(t) * kFeatureDim;
    out.frames.insert(out.frames.end(), row, row + kFeatureDim);
    out.log_energy.push_back(features.log_energy[t]);
    ++out.num_frames;
  }
  return out;
}

FeatureFrameSequence SpeakerFeatures(const Waveform &wave, const FeatureOptions &opts) {
  FeatureFrameSequence f = MfccFeatures(wave, opts);
  if (opts.apply_vad) f = SelectFrames(f, EnergyVad(f, opts.vad_threshold_db));
  if (f.num_frames == 0) throw Error(Errc::kEmptyAfterVad, wave.source_id);
  return f;
}

void WriteFeatureDump(const FeatureFrameSequence &features, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  const std::int32_t header[2] = {features.num_frames, kFeatureDim};
  out.write(reinterpret_cast<const char *>(header), sizeof header);
  for (double v : features.frames) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char *>(&f), sizeof f);
  }
}

}  // namespace spex
