// core/src/checkpoint.cc

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

#include "spex/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "spex/config.h"
#include "spex/error.h"

namespace spex {
namespace {

constexpr char kMagic[8] = {'S', 'P', 'E', 'X', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream &out) : out_(out) {}
  template <class T>
  void Int(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.put(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
  }
  void Bytes(const std::string &s) {
    Int<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void Float(float f) { Int(std::bit_cast<std::uint32_t>(f)); }

 private:
  std::ostream &out_;
};

class Reader {
 public:
  Reader(std::istream &in, std::string path) : in_(in), path_(std::move(path)) {}
  template <class T>
  T Int() {
    unsigned char buf[sizeof(T)];
    Raw(buf, sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }
  std::string Bytes(std::uint64_t limit) {
    auto n = Int<std::uint64_t>();
    if (n > limit) Fail("field length out of range");
    std::string s(n, '\0');
    Raw(s.data(), n);
    return s;
  }
  float Float() { return std::bit_cast<float>(Int<std::uint32_t>()); }
  void Raw(void *dst, std::size_t n) {
    in_.read(static_cast<char *>(dst), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) Fail("truncated file");
  }
  [[noreturn]] void Fail(const std::string &why) const { throw Error(Errc::kBadCheckpoint, path_ + ": " + why); }

 private:
  std::istream &in_;
  std::string path_;
};

}  // namespace

void SaveCheckpoint(const SpexModel &model, const std::filesystem::path &path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kIoError, "cannot write " + path.string());
  Writer w(f);
  f.write(kMagic, sizeof kMagic);
  w.Int(kVersion);
  w.Bytes(ModelConfigToJson(model.config()));
  w.Int<std::uint64_t>(model.parameters().size());
  for (const auto &p : model.parameters()) {
    w.Int<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    f.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const nn::Shape s = p.value.shape();
    w.Int<std::uint32_t>(3);
    w.Int<std::uint64_t>(s.batch);
    w.Int<std::uint64_t>(s.channels);
    w.Int<std::uint64_t>(s.frames);
    for (double v : p.value.value()) w.Float(static_cast<float>(v));
  }
  if (!f) throw Error(Errc::kIoError, "write failed for " + path.string());
}

SpexModel LoadCheckpoint(const std::filesystem::path &path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kNotFound, path.string());
  Reader r(f, path.string());
  char magic[8];
  r.Raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.Fail("not a checkpoint");
  if (r.Int<std::uint32_t>() != kVersion) r.Fail("unsupported version");

  SpexConfig config;
  try {
    config = ModelConfigFromJson(r.Bytes(1 << 20));
  } catch (const Error &e) {
    r.Fail(std::string("bad config: ") + e.what());
  }
  SpexModel model(config);
  std::map<std::string, nn::Var> by_name;
  for (auto &p : model.parameters()) by_name.emplace(p.name, p.value);

  const auto count = r.Int<std::uint64_t>();
  if (count != by_name.size()) r.Fail("expected " + std::to_string(by_name.size()) + " arrays, found " + std::to_string(count));
  std::map<std::string, bool> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.Int<std::uint32_t>();
    if (name_len > 4096) r.Fail("array name too long");
    std::string name(name_len, '\0');
    r.Raw(name.data(), name_len);
    auto it = by_name.find(name);
    if (it == by_name.end()) r.Fail("unknown array " + name);
    if (seen[name]) r.Fail("duplicate array " + name);
    seen[name] = true;
    if (r.Int<std::uint32_t>() != 3) r.Fail(name + ": rank must be 3");
    nn::Shape s{r.Int<std::uint64_t>(), r.Int<std::uint64_t>(), r.Int<std::uint64_t>()};
    if (!(s == it->second.shape()))
      r.Fail(name + ": shape " + s.str() + " does not match config shape " + it->second.shape().str());
    auto &values = it->second.mutable_value();
    for (double &v : values) v = r.Float();
  }
  return model;
}

}  // namespace spex
