// core/src/config.cc

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

#include "spex/config.h"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "spex/error.h"

namespace spex {
namespace {

using nlohmann::ordered_json;

template <class F>
void VisitFeatures(FeatureOptions &f, F &&visit) {
  visit("apply_cmn", f.apply_cmn);
  visit("cmn_window_frames", f.cmn_window_frames);
  visit("apply_vad", f.apply_vad);
  visit("vad_threshold_db", f.vad_threshold_db);
}

template <class F>
void VisitModel(SpexConfig &m, F &&visit) {
  visit("N", m.N);
  visit("L1", m.L1);
  visit("L2", m.L2);
  visit("L3", m.L3);
  visit("O", m.O);
  visit("P", m.P);
  visit("Q", m.Q);
  visit("B", m.B);
  visit("R", m.R);
  visit("D", m.D);
  visit("n_speakers", m.n_speakers);
  visit("alpha", m.alpha);
  visit("beta", m.beta);
  visit("gamma", m.gamma);
  visit("lstm_hidden", m.lstm_hidden);
  visit("speaker_hidden", m.speaker_hidden);
}

template <class F>
void VisitTrain(TrainConfig &t, F &&visit) {
  visit("lr0", t.lr0);
  visit("lr_halve_patience_epochs", t.lr_halve_patience_epochs);
  visit("early_stop_patience_epochs", t.early_stop_patience_epochs);
  visit("segment_seconds", t.segment_seconds);
  visit("batch_size", t.batch_size);
  visit("max_epochs", t.max_epochs);
  visit("adam_beta1", t.adam_beta1);
  visit("adam_beta2", t.adam_beta2);
  visit("adam_eps", t.adam_eps);
  visit("grad_clip_norm", t.grad_clip_norm);
  visit("strict_increase", t.strict_increase);
  visit("full_utterance_dev", t.full_utterance_dev);
}

template <class T>
void ReadValue(const ordered_json &j, const std::string &key, T &out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) throw Error(Errc::kTypeError, key + " must be a boolean");
    out = j.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) throw Error(Errc::kTypeError, key + " must be an integer");
    if (std::is_unsigned_v<T> && j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)
      throw Error(Errc::kRangeError, key + " must be nonnegative");
    out = j.get<T>();
  } else {
    if (!j.is_number()) throw Error(Errc::kTypeError, key + " must be a number");
    out = j.get<T>();
  }
}

ordered_json ModelJson(const SpexConfig &config) {
  SpexConfig c = config;
  ordered_json j;
  VisitModel(c, [&](const char *k, auto &v) { j[k] = v; });
  ordered_json f;
  VisitFeatures(c.features, [&](const char *k, auto &v) { f[k] = v; });
  j["features"] = f;
  return j;
}

void RequireObject(const ordered_json &j, const std::string &where) {
  if (!j.is_object()) throw Error(Errc::kTypeError, where + " must be a JSON object");
}

void ReadFeatures(const ordered_json &j, FeatureOptions &f, const std::string &prefix) {
  RequireObject(j, prefix);
  for (const auto &[key, value] : j.items()) {
    bool found = false;
    VisitFeatures(f, [&](const char *k, auto &v) {
      if (key == k) {
        ReadValue(value, prefix + "." + key, v);
        found = true;
      }
    });
    if (!found) throw Error(Errc::kUnknownKey, prefix + "." + key);
  }
}

void ReadModel(const ordered_json &j, SpexConfig &m) {
  RequireObject(j, "model");
  for (const auto &[key, value] : j.items()) {
    if (key == "features") {
      ReadFeatures(value, m.features, "model.features");
      continue;
    }
    bool found = false;
    VisitModel(m, [&](const char *k, auto &v) {
      if (key == k) {
        ReadValue(value, "model." + key, v);
        found = true;
      }
    });
    if (!found) throw Error(Errc::kUnknownKey, "model." + key);
  }
}

void ReadTrain(const ordered_json &j, TrainConfig &t) {
  RequireObject(j, "train");
  for (const auto &[key, value] : j.items()) {
    bool found = false;
    VisitTrain(t, [&](const char *k, auto &v) {
      if (key == k) {
        ReadValue(value, "train." + key, v);
        found = true;
      }
    });
    if (!found) throw Error(Errc::kUnknownKey, "train." + key);
  }
}

template <class T>
T ParseScalar(const std::string &key, const std::string &text) {
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(Errc::kTypeError, key + " expects true or false, got '" + text + "'");
  } else if constexpr (std::is_integral_v<T>) {
    if (std::is_unsigned_v<T> && !text.empty() && text[0] == '-')
      throw Error(Errc::kRangeError, key + " must be nonnegative");
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw Error(Errc::kTypeError, key + " expects an integer, got '" + text + "'");
    return out;
  } else {
    char *end = nullptr;
    out = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size())
      throw Error(Errc::kTypeError, key + " expects a number, got '" + text + "'");
    return out;
  }
}

template <class T>
void ParseInto(const std::string &key, const std::string &text, T &out) {
  out = ParseScalar<T>(key, text);
}

void ApplyOverride(CliConfig &c, std::string key, const std::string &value, bool &seed_set) {
  if (key.rfind("--", 0) == 0) key = key.substr(2);
  if (key == "alpha" || key == "beta" || key == "gamma") key = "model." + key;
  if (key == "seed") {
    c.seed = ParseScalar<std::uint64_t>(key, value);
    seed_set = true;
    return;
  }
  bool found = false;
  auto match = [&](const std::string &full) {
    return [&, full](const char *k, auto &v) {
      if (key == full + k) {
        ParseInto(key, value, v);
        found = true;
      }
    };
  };
  VisitModel(c.model, match("model."));
  VisitFeatures(c.model.features, match("model.features."));
  VisitTrain(c.train, match("train."));
  if (!found) throw Error(Errc::kUnknownKey, key);
}

}  // namespace

CliConfig ParseConfigText(const std::string &json_text, const std::vector<ConfigOverride> &overrides) {
  CliConfig c;
  bool seed_set = false;
  bool blank = json_text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (!blank) {
    ordered_json j;
    try {
      j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error &e) {
      throw Error(Errc::kTypeError, std::string("config is not valid JSON: ") + e.what());
    }
    RequireObject(j, "config");
    for (const auto &[key, value] : j.items()) {
      if (key == "model") {
        ReadModel(value, c.model);
      } else if (key == "train") {
        ReadTrain(value, c.train);
      } else if (key == "seed") {
        ReadValue(value, "seed", c.seed);
        seed_set = true;
      } else {
        throw Error(Errc::kUnknownKey, key);
      }
    }
  }
  for (const auto &[key, value] : overrides) ApplyOverride(c, key, value, seed_set);
  if (!seed_set) {
    if (const char *env = std::getenv("SPEX_SEED"); env && *env)
      c.seed = ParseScalar<std::uint64_t>("SPEX_SEED", env);
  }
  c.train.seed = c.seed;
  c.model.Validate();
  c.train.Validate(c.model);
  return c;
}

CliConfig ParseConfig(const std::optional<std::filesystem::path> &file,
                      const std::vector<ConfigOverride> &overrides) {
  std::string text;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw Error(Errc::kNotFound, file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return ParseConfigText(text, overrides);
}

std::string ConfigToJson(const CliConfig &config) {
  ordered_json j;
  j["model"] = ModelJson(config.model);
  TrainConfig t = config.train;
  ordered_json tj;
  VisitTrain(t, [&](const char *k, auto &v) { tj[k] = v; });
  j["train"] = tj;
  j["seed"] = config.seed;
  return j.dump(2);
}

std::string ModelConfigToJson(const SpexConfig &config) { return ModelJson(config).dump(); }

SpexConfig ModelConfigFromJson(const std::string &json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(Errc::kTypeError, std::string("model config is not valid JSON: ") + e.what());
  }
  SpexConfig c;
  ReadModel(j, c);
  c.Validate();
  return c;
}

}  // namespace spex
