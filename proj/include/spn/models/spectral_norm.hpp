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

#include <string>

#include "spn/param.hpp"
#include "spn/tensor.hpp"

namespace spn {

/// Power-iteration state for one weight: the left singular-vector estimate u
/// of the (out x rest) weight matrix, kept at unit norm.
template <typename T>
struct SpectralState {
  Tensor<T> u;  // (1, 1, 1, out)

  SpectralState() = default;
  /// Deterministic unit-norm start vector.
  explicit SpectralState(int out_features);
};

template <typename T>
struct SpectralResult {
  Tensor<T> weight;  // weight / sigma
  T sigma = 0;
  Tensor<T> v;  // right singular-vector estimate, (1, 1, 1, rest)
};

/// Divides `weight` by a power-iteration estimate of its top singular value.
///
/// The tensor's last extent is the output axis; everything before it is
/// flattened into the "rest" axis. `iters` updates of (v, u) are applied to
/// `state` before sigma = u^T W v is evaluated. A zero matrix yields a zero
/// normalized weight (sigma is floored at epsilon).
template <typename T>
SpectralResult<T> spectral_normalize(const Tensor<T>& weight,
                                     SpectralState<T>& state, int iters = 1);

/// While alive, spectral normalization reuses the stored u instead of running
/// power iteration. Finite-difference checks need a fixed normalization map.
class FreezePowerIteration {
 public:
  FreezePowerIteration();
  ~FreezePowerIteration();
  FreezePowerIteration(const FreezePowerIteration&) = delete;
  FreezePowerIteration& operator=(const FreezePowerIteration&) = delete;

  static bool active();

 private:
  bool previous_;
};

/// A learnable weight that is optionally spectrally normalized on use.
template <typename T>
class SnParam {
 public:
  SnParam() = default;
  SnParam(Shape shape, bool spectral, T fill = T(0));

  /// Effective weight for this forward pass. Runs one power iteration in
  /// train mode unless frozen.
  const Tensor<T>& weight(Mode mode);
  /// Maps dL/d(effective weight) onto the raw parameter gradient.
  void backward(const Tensor<T>& grad_effective);

  void collect(ParamRegistry<T>& reg, const std::string& name);

  Param<T>& param() { return param_; }
  const Param<T>& param() const { return param_; }
  bool spectral() const { return spectral_; }
  SpectralState<T>& state() { return state_; }
  T sigma() const { return sigma_; }

 private:
  Param<T> param_;
  bool spectral_ = false;
  SpectralState<T> state_;
  Tensor<T> effective_;
  Tensor<T> v_;
  T sigma_ = 1;
};

}  // namespace spn
