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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "spn/param.hpp"
#include "spn/tensor.hpp"

namespace spn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat named-tensor archive.
///
/// On-disk layout (all integers little-endian):
///
///   magic    8 bytes  "SPNCKPT\0"
///   version  u32      kCheckpointVersion
///   count    u32      number of entries
///   entries, each:
///     name_len u32, name bytes (UTF-8, no terminator)
///     kind     u8     0 = float32 tensor, 1 = float64 tensor, 2 = text
///     tensor:  4 x i32 shape (n, h, w, c), then n*h*w*c values row-major
///     text:    u64 length, then bytes
///
/// Entries are written in name order. Files are written to a temporary
/// sibling and renamed into place.
struct Checkpoint {
  std::map<std::string, Tensor<float>> f32;
  std::map<std::string, Tensor<double>> f64;
  std::map<std::string, std::string> text;

  bool contains(const std::string& name) const {
    return f32.count(name) || f64.count(name) || text.count(name);
  }
  /// Throws CheckpointError when missing.
  const std::string& get_text(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores every parameter and buffer of `reg` under its registry name.
template <typename T>
void store_registry(Checkpoint& ckpt, const ParamRegistry<T>& reg);

/// Restores every parameter and buffer of `reg`; throws CheckpointError
/// listing missing names or shape mismatches.
template <typename T>
void restore_registry(const Checkpoint& ckpt, const ParamRegistry<T>& reg);

}  // namespace spn
