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
#include <iosfwd>
#include <string>
#include <vector>

#include "spn/experiment/config.hpp"
#include "spn/metrics/metrics.hpp"
#include "spn/models/networks.hpp"
#include "spn/tensor.hpp"
#include "spn/training/trainer.hpp"

// Library side of the `spn` command line tool. Every command validates its
// whole configuration before it creates or writes anything.
namespace spn::commands {

/// Class count implied by the data section (0 for unconditional models).
/// Image folders are counted without decoding any file.
int configured_num_classes(const ExperimentConfig& cfg);

TrainingResult train(const ExperimentConfig& cfg, std::ostream& log);

/// Scores the checkpoint (eval.checkpoint, default
/// <out_dir>/checkpoints/latest.bin) against the configured dataset; writes
/// <out_dir>/eval.txt (key=value) and appends "iter fid is_mean is_std" to
/// <out_dir>/eval.log.
EvalResult eval(const ExperimentConfig& cfg, std::ostream& log);

/// Runs the finite-difference suite; true when every check passes.
bool gradcheck(const Shape& shape, std::uint64_t seed, std::ostream& log);

/// BN-versus-SPN parameter and FLOP audit of the configured generator.
/// Writes <out_dir>/audit.txt (tables) and <out_dir>/audit.kv.
Audit audit(const ExperimentConfig& cfg, std::ostream& log);

/// Mask grid of masks.layer for masks.samples latents from masks.seed;
/// writes <out_dir>/masks/layer<L>.png and <out_dir>/masks/masks.kv.
MaskVisualization masks(const ExperimentConfig& cfg, std::ostream& log);

struct VariantOutcome {
  std::string name;
  std::string out_dir;
  std::int64_t iterations = 0;
  double d_loss = 0;
  double g_loss = 0;
  bool finite = false;
  std::string error;  // empty on success
};

/// Expands `sweep.` keys and trains every variant into <out_dir>/<variant>
/// with the shared seed; writes <out_dir>/summary.tsv. All variants are
/// validated before the first one starts.
std::vector<VariantOutcome> ablate(const KeyValues& kv, std::ostream& log);

}  // namespace spn::commands
