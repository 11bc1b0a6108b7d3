// Copyright 2026 The SPN-GAN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spn/io/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <type_traits>
#include <vector>

namespace spn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic = {'S', 'P', 'N', 'C', 'K', 'P', 'T', '\0'};

enum Kind : std::uint8_t { kF32 = 0, kF64 = 1, kText = 2 };

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename V>
  void put(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void name(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  template <typename T>
  void tensor(const Tensor<T>& t) {
    const Shape& s = t.shape();
    for (int d : {s.n, s.h, s.w, s.c}) put(static_cast<std::int32_t>(d));
    bytes(t.data(), t.size() * sizeof(T));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename V>
  V get() {
    V v;
    read(&v, sizeof v);
    return v;
  }
  void read(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  std::string string(std::uint64_t n) {
    if (n > (1ull << 32)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  template <typename T>
  Tensor<T> tensor() {
    Shape s;
    s.n = get<std::int32_t>();
    s.h = get<std::int32_t>();
    s.w = get<std::int32_t>();
    s.c = get<std::int32_t>();
    if (s.n < 0 || s.h < 0 || s.w < 0 || s.c < 0 || s.size() > (1ull << 34)) {
      fail("bad tensor shape " + s.str());
    }
    Tensor<T> t(s);
    read(t.data(), t.size() * sizeof(T));
    return t;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError("checkpoint " + path_ + ": " + what);
  }

 private:
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

const std::string& Checkpoint::get_text(const std::string& name) const {
  auto it = text.find(name);
  if (it == text.end()) throw CheckpointError("checkpoint has no entry '" + name + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    Writer w(out);
    w.bytes(kMagic.data(), kMagic.size());
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(ckpt.f32.size() + ckpt.f64.size() + ckpt.text.size()));
    // Merge the three maps so entries come out in global name order.
    std::map<std::string, int> order;
    for (const auto& [k, v] : ckpt.f32) order[k] = kF32;
    for (const auto& [k, v] : ckpt.f64) {
      if (!order.emplace(k, kF64).second) throw CheckpointError("duplicate entry " + k);
    }
    for (const auto& [k, v] : ckpt.text) {
      if (!order.emplace(k, kText).second) throw CheckpointError("duplicate entry " + k);
    }
    for (const auto& [name, kind] : order) {
      w.name(name);
      w.put(static_cast<std::uint8_t>(kind));
      if (kind == kF32) {
        w.tensor(ckpt.f32.at(name));
      } else if (kind == kF64) {
        w.tensor(ckpt.f64.at(name));
      } else {
        const std::string& s = ckpt.text.at(name);
        w.put(static_cast<std::uint64_t>(s.size()));
        w.bytes(s.data(), s.size());
      }
    }
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string() + " (disk full?)");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  std::array<char, 8> magic{};
  r.read(magic.data(), magic.size());
  if (magic != kMagic) r.fail("bad magic (not a checkpoint file)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version) + " (expected " +
           std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(r.get<std::uint32_t>());
    const auto kind = r.get<std::uint8_t>();
    if (kind == kF32) {
      ckpt.f32.emplace(name, r.tensor<float>());
    } else if (kind == kF64) {
      ckpt.f64.emplace(name, r.tensor<double>());
    } else if (kind == kText) {
      ckpt.text.emplace(name, r.string(r.get<std::uint64_t>()));
    } else {
      r.fail("unknown entry kind " + std::to_string(kind) + " for " + name);
    }
  }
  return ckpt;
}

namespace {

template <typename T>
std::map<std::string, Tensor<T>>& table(Checkpoint& c) {
  if constexpr (std::is_same_v<T, float>) {
    return c.f32;
  } else {
    return c.f64;
  }
}

template <typename T>
const std::map<std::string, Tensor<T>>& table(const Checkpoint& c) {
  if constexpr (std::is_same_v<T, float>) {
    return c.f32;
  } else {
    return c.f64;
  }
}

}  // namespace

template <typename T>
void store_registry(Checkpoint& ckpt, const ParamRegistry<T>& reg) {
  auto& t = table<T>(ckpt);
  for (const auto& e : reg.params()) t[e.name] = e.param->value;
  for (const auto& b : reg.buffers()) t[b.name] = *b.tensor;
}

template <typename T>
void restore_registry(const Checkpoint& ckpt, const ParamRegistry<T>& reg) {
  const auto& t = table<T>(ckpt);
  std::string problems;
  auto restore = [&](const std::string& name, Tensor<T>& dst) {
    auto it = t.find(name);
    if (it == t.end()) {
      problems += "\n  missing " + name;
    } else if (!(it->second.shape() == dst.shape())) {
      problems += "\n  " + name + ": shape " + it->second.shape().str() + " vs model " +
                  dst.shape().str();
    } else {
      dst = it->second;
    }
  };
  for (const auto& e : reg.params()) restore(e.name, e.param->value);
  for (const auto& b : reg.buffers()) restore(b.name, *b.tensor);
  if (!problems.empty()) throw CheckpointError("checkpoint does not match model:" + problems);
}

template void store_registry(Checkpoint&, const ParamRegistry<float>&);
template void store_registry(Checkpoint&, const ParamRegistry<double>&);
template void restore_registry(const Checkpoint&, const ParamRegistry<float>&);
template void restore_registry(const Checkpoint&, const ParamRegistry<double>&);

}  // namespace spn
