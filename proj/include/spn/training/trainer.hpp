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
#include <iosfwd>
#include <vector>

#include "spn/data/dataset.hpp"
#include "spn/experiment/config.hpp"
#include "spn/io/checkpoint.hpp"
#include "spn/models/networks.hpp"
#include "spn/training/losses.hpp"
#include "spn/training/optim.hpp"

namespace spn {

struct StepMetrics {
  std::int64_t iter = 0;  // generator updates completed
  double d_loss = 0;      // mean over the n_dis discriminator updates
  double g_loss = 0;
  double lr_g = 0;
  double lr_d = 0;
  double grad_norm_d = 0;  // last discriminator update
  double grad_norm_g = 0;
};

/// One GAN training run in single precision.
///
/// A step performs n_dis discriminator updates, each on its own real batch
/// with real and fake samples concatenated into one forward pass, followed by
/// one generator update on batch_g fresh latents.
class Trainer {
 public:
  /// `data` must outlive the trainer.
  Trainer(const ExperimentConfig& cfg, const Dataset& data);

  StepMetrics step();
  std::int64_t iteration() const { return iter_; }

  Generator<float>& generator() { return gen_; }
  Discriminator<float>& discriminator() { return dis_; }
  const ParamRegistry<float>& generator_params() const { return gen_reg_; }
  const ParamRegistry<float>& discriminator_params() const { return dis_reg_; }
  int num_classes() const { return num_classes_; }
  /// Dataset rows of every discriminator batch of the most recent step.
  const std::vector<std::vector<int>>& last_batches() const { return last_batches_; }

  /// Eval-mode samples from latents drawn with `seed`; class i % K for
  /// conditional models. Does not touch the training RNG.
  Tensor<float> sample(int n, std::uint64_t seed, std::vector<int>* classes = nullptr);

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

 private:
  Tensor<float> draw_latents(int n, Rng& rng) const;
  std::vector<int> draw_classes(int n, Rng& rng) const;
  [[noreturn]] void fail_non_finite(const std::string& what) const;

  ExperimentConfig cfg_;
  const Dataset* data_;
  int num_classes_;
  Generator<float> gen_;
  Discriminator<float> dis_;
  ParamRegistry<float> gen_reg_;
  ParamRegistry<float> dis_reg_;
  Adam<float> opt_g_;
  Adam<float> opt_d_;
  BatchIterator batches_;
  Rng rng_;
  std::int64_t iter_ = 0;
  std::vector<std::vector<int>> last_batches_;
};

/// Restores a generator from a training checkpoint written by `run_training`.
/// The config is read back from the checkpoint itself.
struct LoadedGenerator {
  ExperimentConfig cfg;
  int num_classes = 0;
  std::unique_ptr<Generator<float>> gen;
};
LoadedGenerator load_generator(const std::filesystem::path& checkpoint);

/// Writes <out_dir>/config.txt, metrics.log, checkpoints/ and samples/.
///
/// metrics.log holds one line per generator update,
///   iter d_loss g_loss lr_g lr_d [wall_time]
/// with wall_time (seconds since start) only when train.log_wall_time is set.
/// With train.resume an existing checkpoints/latest.bin is picked up and the
/// log is truncated to the restored iteration.
struct TrainingResult {
  std::filesystem::path out_dir;
  std::int64_t iterations = 0;
  StepMetrics last;
};
TrainingResult run_training(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

std::string format_metrics_line(const StepMetrics& m, const double* wall_time);

}  // namespace spn
