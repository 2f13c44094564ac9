// core/include/spex/error.h

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

#ifndef SPEX_ERROR_H_
#define SPEX_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace spex {

enum class Errc {
  kNotFound,
  kUnsupportedFormat,
  kSampleRateMismatch,
  kIoError,
  kEmptyCorpus,
  kSilentSource,
  kInsufficientSpeakers,
  kInsufficientUtterances,
  kTooShort,
  kShapeMismatch,
  kNonFiniteLoss,
  kEmptyAfterVad,
  kSilentReference,
  kIndexOutOfRange,
  kEmptyAfterSegmentation,
  kUnknownKey,
  kTypeError,
  kRangeError,
  kBadCheckpoint,
};

std::string_view ErrcName(Errc code);

/// Domain error raised by every module. The code identifies the failure
/// class; the message carries the details for the user.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string &message)
      : std::runtime_error(std::string(ErrcName(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace spex

#endif  // SPEX_ERROR_H_
