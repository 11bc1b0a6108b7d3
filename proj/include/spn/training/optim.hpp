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
#include <string>
#include <utility>
#include <vector>

#include "spn/io/checkpoint.hpp"
#include "spn/param.hpp"

namespace spn {

struct AdamConfig {
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

/// Adam over every parameter of a registry (buffers are left alone).
template <typename T>
class Adam {
 public:
  Adam(const ParamRegistry<T>& reg, AdamConfig cfg);

  /// One update with learning rate `lr` from the accumulated gradients.
  void step(double lr);
  std::int64_t steps() const { return steps_; }

  /// Moments and step count under `prefix`.
  void save(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  ParamRegistry<T> reg_;
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
};

/// Constant until total - decay_last, then linear to 0 at total.
struct LrSchedule {
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  std::int64_t total_iters = 50000;
  std::int64_t decay_last_iters = 50000;

  double factor(std::int64_t iter) const;
  /// (lr_g, lr_d) at generator iteration `iter`.
  std::pair<double, double> at(std::int64_t iter) const {
    const double f = factor(iter);
    return {lr_g * f, lr_d * f};
  }
};

/// L2 norm over all gradients of a registry.
template <typename T>
double grad_norm(const ParamRegistry<T>& reg);

}  // namespace spn
