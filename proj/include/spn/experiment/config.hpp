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
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spn/core/spn_layer.hpp"
#include "spn/data/dataset.hpp"
#include "spn/models/networks.hpp"
#include "spn/training/losses.hpp"
#include "spn/training/optim.hpp"

namespace spn {

/// Invalid configuration; what() lists every problem found, one per line.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered key/value pairs as read from a config file.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;

  /// Appends; the last assignment of a key wins.
  void set(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  std::optional<std::string> get(const std::string& key) const;
  /// Last value of every key, in first-appearance order.
  KeyValues resolved() const;
};

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored. `include = path` splices another file in place (relative paths
/// resolve against `base_dir`); later assignments override earlier ones.
KeyValues parse_key_values(const std::string& text, const std::filesystem::path& base_dir);
KeyValues read_key_values(const std::filesystem::path& path);

struct DataConfig {
  std::string kind = "shapes";  // shapes | cifar10 | cifar100 | folder
  std::string path;             // relative paths resolve against SPN_DATA_ROOT
  int size = 32;
  int count = 5000;             // shapes only
  std::uint64_t shapes_seed = 0;
  bool train_split = true;      // cifar only
  bool flip = false;
};

struct ModelConfig {
  int resolution = 32;
  NormKind norm = NormKind::kSpn;
  /// 0 keeps the reference widths; otherwise every block uses this width.
  int g_width = 0;
  int d_width = 0;
  int z_dim = 128;
  /// "auto" means spectral norm in the generator only at 128x128.
  std::string g_spectral = "auto";
  bool attention = false;
  SpnOptions spn;
};

struct TrainConfig {
  LossKind loss = LossKind::kHinge;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  AdamConfig adam;
  int n_dis = 5;
  int batch_d = 64;
  int batch_g = 128;
  std::int64_t total_iters = 50000;
  std::int64_t decay_last_iters = 50000;
  std::int64_t checkpoint_every = 5000;
  std::int64_t sample_every = 1000;
  bool log_wall_time = false;
  bool resume = true;

  LrSchedule schedule() const { return {lr_g, lr_d, total_iters, decay_last_iters}; }
};

struct EvalConfig {
  std::string checkpoint;        // empty: <out_dir>/checkpoints/latest.bin
  std::string extractor = "toy"; // "toy" or a path to a saved extractor
  int samples = 50000;
  int batch = 100;
  std::uint64_t seed = 0;
};

struct MaskConfig {
  std::string checkpoint;  // empty: <out_dir>/checkpoints/latest.bin
  int layer = -1;          // index into the SPN layers, negative counts from the end
  std::vector<int> channels{0, 1, 2, 3};
  int samples = 4;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string out_dir = "runs/default";
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  MaskConfig masks;
  /// Maximum number of sweep variants run at once.
  int ablate_parallel = 1;

  /// Applies every key; unknown keys and unparsable values are collected
  /// and thrown together as one ConfigError. Keys starting with "sweep."
  /// are ignored here.
  static ExperimentConfig from_key_values(const KeyValues& kv);
  /// Throws ConfigError listing every violated constraint.
  void validate() const;
  /// Resolved snapshot; parsing it back yields an identical config.
  std::string to_text() const;

  bool conditional() const { return is_conditional(model.norm); }
  GeneratorSpec generator_spec(int num_classes) const;
  DiscriminatorSpec discriminator_spec(int num_classes) const;
};

/// Reads, parses and validates.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// One named variant of a sweep.
struct SweepVariant {
  std::string name;
  KeyValues values;
};

/// Expands every `sweep.<key> = a,b,c` entry into the cartesian product of
/// variants (first sweep key varies slowest). Without sweep keys the result
/// is a single variant named "base".
std::vector<SweepVariant> expand_sweep(const KeyValues& kv);

/// Resolves a data path: absolute paths pass through, relative ones are
/// joined to $SPN_DATA_ROOT when it is set.
std::filesystem::path resolve_data_path(const std::string& path);

/// Loads or synthesizes the configured dataset.
Dataset load_dataset(const DataConfig& cfg);

/// Library version plus the source revision the build was configured from.
std::string version_stamp();

}  // namespace spn
