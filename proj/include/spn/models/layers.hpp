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

#include "spn/flops.hpp"
#include "spn/init.hpp"
#include "spn/models/spectral_norm.hpp"
#include "spn/param.hpp"
#include "spn/tensor.hpp"

namespace spn {

/// Stride-1, same-padded convolution with optional bias and spectral norm.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in, int out, int kernel_size, bool bias, bool spectral);

  /// Orthogonal weight, zero bias.
  void init(Rng& rng, T gain = T(1));

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(ParamRegistry<T>& reg, const std::string& prefix);
  Shape trace(const Shape& in, FlopCounter& flops) const;

  SnParam<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

 private:
  int in_ = 0;
  int out_ = 0;
  int k_ = 1;
  bool has_bias_ = false;
  SnParam<T> weight_;
  Param<T> bias_;
  Tensor<T> x_;
  const Tensor<T>* w_ = nullptr;
};

/// Fully connected layer on (B, 1, 1, in) tensors.
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(int in, int out, bool bias, bool spectral);

  void init(Rng& rng, T gain = T(1));
  Tensor<T> forward(const Tensor<T>& x, Mode mode) { return conv_.forward(x, mode); }
  Tensor<T> backward(const Tensor<T>& dy) { return conv_.backward(dy); }
  void collect(ParamRegistry<T>& reg, const std::string& prefix) {
    conv_.collect(reg, prefix);
  }
  Shape trace(const Shape& in, FlopCounter& flops) const {
    return conv_.trace(in, flops);
  }

  SnParam<T>& weight() { return conv_.weight(); }
  Param<T>& bias() { return conv_.bias(); }

 private:
  Conv2d<T> conv_;
};

/// Spatial gate x * sigmoid(conv7x7([mean_c(x); max_c(x)]) + b).
template <typename T>
class SpatialAttention {
 public:
  explicit SpatialAttention(bool spectral = false, int kernel_size = 7);

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(ParamRegistry<T>& reg, const std::string& prefix) {
    conv_.collect(reg, prefix);
  }
  Shape trace(const Shape& in, FlopCounter& flops) const;

  Conv2d<T>& conv() { return conv_; }
  /// Gate from the most recent forward pass, (B, H, W, 1).
  const Tensor<T>& gate() const { return gate_; }

 private:
  Conv2d<T> conv_;
  Tensor<T> x_;
  Tensor<T> gate_;
  std::vector<int> argmax_;
};

}  // namespace spn
