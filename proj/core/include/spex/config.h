// core/include/spex/config.h

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

#ifndef SPEX_CONFIG_H_
#define SPEX_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spex/model.h"
#include "spex/trainer.h"

namespace spex {

/// Resolved run configuration: model and training sections plus the seed.
struct CliConfig {
  SpexConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
};

using ConfigOverride = std::pair<std::string, std::string>;

/// Merges a JSON file (sections "model", "train" and an optional "seed")
/// over the defaults, then applies dotted overrides such as
/// {"model.R", "2"}. The keys alpha, beta, gamma and seed are accepted
/// without a section. When no seed is given the SPEX_SEED environment
/// variable is used. Throws kUnknownKey, kTypeError and kRangeError.
CliConfig ParseConfig(const std::optional<std::filesystem::path> &file,
                      const std::vector<ConfigOverride> &overrides = {});
CliConfig ParseConfigText(const std::string &json_text,
                          const std::vector<ConfigOverride> &overrides = {});

std::string ConfigToJson(const CliConfig &config);
std::string ModelConfigToJson(const SpexConfig &config);
/// Strict parse of ModelConfigToJson output; missing keys keep defaults.
SpexConfig ModelConfigFromJson(const std::string &json_text);

}  // namespace spex

#endif  // SPEX_CONFIG_H_
