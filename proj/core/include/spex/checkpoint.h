// core/include/spex/checkpoint.h

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

#ifndef SPEX_CHECKPOINT_H_
#define SPEX_CHECKPOINT_H_

#include <filesystem>

#include "spex/model.h"

namespace spex {

/// Layout: "SPEXCKPT", u32 version, u64 length + model config JSON, u64
/// array count, then per array u32 name length, name, u32 rank, u64 dims,
/// float32 values. All integers and floats little-endian.
void SaveCheckpoint(const SpexModel &model, const std::filesystem::path &path);

/// Rebuilds the model from the stored config and fills every parameter.
/// Throws kNotFound or kBadCheckpoint on a missing, unknown, duplicated or
/// misshapen array.
SpexModel LoadCheckpoint(const std::filesystem::path &path);

}  // namespace spex

#endif  // SPEX_CHECKPOINT_H_
