// core/src/error.cc

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

#include "spex/error.h"

namespace spex {

std::string_view ErrcName(Errc code) {
  switch (code) {
    case Errc::kNotFound: return "NotFound";
    case Errc::kUnsupportedFormat: return "UnsupportedFormat";
    case Errc::kSampleRateMismatch: return "SampleRateMismatch";
    case Errc::kIoError: return "IoError";
    case Errc::kEmptyCorpus: return "EmptyCorpus";
    case Errc::kSilentSource: return "SilentSource";
    case Errc::kInsufficientSpeakers: return "InsufficientSpeakers";
    case Errc::kInsufficientUtterances: return "InsufficientUtterances";
    case Errc::kTooShort: return "TooShort";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kNonFiniteLoss: return "NonFiniteLoss";
    case Errc::kEmptyAfterVad: return "EmptyAfterVad";
    case Errc::kSilentReference: return "SilentReference";
    case Errc::kIndexOutOfRange: return "IndexOutOfRange";
    case Errc::kEmptyAfterSegmentation: return "EmptyAfterSegmentation";
    case Errc::kUnknownKey: return "UnknownKey";
    case Errc::kTypeError: return "TypeError";
    case Errc::kRangeError: return "RangeError";
    case Errc::kBadCheckpoint: return "BadCheckpoint";
  }
  return "Unknown";
}

}  // namespace spex
