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

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spn/flops.hpp"
#include "spn/param.hpp"
#include "spn/tensor.hpp"

namespace spn {

/// Optional class condition and latent vector passed to conditional layers.
template <typename T>
struct Condition {
  std::span<const int> classes;  // one id per sample, empty when unconditional
  const Tensor<T>* z = nullptr;  // (B, 1, 1, z_dim) or null

  bool has_classes() const { return !classes.empty(); }
};

/// Per-channel running mean/variance used in eval mode.
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;
  Tensor<T> updates;  // (1,1,1,1): number of train-mode updates seen
  T momentum = T(0.9);
  T epsilon = T(1e-5);

  RunningStats() = default;
  explicit RunningStats(int channels, T momentum = T(0.9), T epsilon = T(1e-5));

  int channels() const { return mean.shape().c; }
  bool initialized() const { return !updates.empty() && updates[0] > T(0); }
};

class UninitializedStatisticsError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Channel-wise normalization without affine modulation:
///   x_hat(j) = (x(j) - E[x(j)]) / sqrt(Var[x(j)] + eps)
/// with statistics over (B, H, W). Train mode uses batch statistics (biased
/// variance) and folds them into the running estimates as
///   running <- momentum * running + (1 - momentum) * batch.
template <typename T>
class ChannelNorm {
 public:
  explicit ChannelNorm(int channels, T momentum = T(0.9), T epsilon = T(1e-5));

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  /// dL/dx given dL/dx_hat for the most recent forward call.
  Tensor<T> backward(const Tensor<T>& dxhat) const;

  const Tensor<T>& output() const { return xhat_; }
  RunningStats<T>& stats() { return stats_; }
  const RunningStats<T>& stats() const { return stats_; }
  int channels() const { return stats_.channels(); }

  void collect(ParamRegistry<T>& reg, const std::string& prefix);
  void trace(const Shape& in, FlopCounter& flops) const;

 private:
  RunningStats<T> stats_;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
  Mode mode_ = Mode::kTrain;
};

/// Free-function form: normalizes `x` and returns the updated statistics.
template <typename T>
std::pair<Tensor<T>, RunningStats<T>> channelwise_normalize(
    const Tensor<T>& x, RunningStats<T> stats, Mode mode);

/// Common interface for every normalization site in a residual block.
template <typename T>
class NormLayer {
 public:
  virtual ~NormLayer() = default;

  virtual Tensor<T> forward(const Tensor<T>& x, const Condition<T>& cond,
                            Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
  virtual void collect(ParamRegistry<T>& reg, const std::string& prefix) = 0;
  virtual void trace(const Shape& in, FlopCounter& flops) const = 0;

  /// dL/dz from the last backward call; empty when the layer ignores z.
  virtual const Tensor<T>& latent_grad() const { return empty_; }

 protected:
  Tensor<T> empty_;
};

/// Batch normalization with learned per-channel scale and shift.
template <typename T>
class BatchNorm final : public NormLayer<T> {
 public:
  explicit BatchNorm(int channels);

  Tensor<T> forward(const Tensor<T>& x, const Condition<T>& cond,
                    Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(ParamRegistry<T>& reg, const std::string& prefix) override;
  void trace(const Shape& in, FlopCounter& flops) const override;

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  ChannelNorm<T>& norm() { return norm_; }

 private:
  ChannelNorm<T> norm_;
  Param<T> gamma_;
  Param<T> beta_;
};

/// Class-conditional batch normalization. Scale and shift are looked up per
/// sample from class tables; with `latent_bias` a linear map of z adds a
/// per-sample bias to both (the "ccBN" variant).
template <typename T>
class ConditionalBatchNorm final : public NormLayer<T> {
 public:
  ConditionalBatchNorm(int channels, int num_classes, int z_dim,
                       bool latent_bias);

  Tensor<T> forward(const Tensor<T>& x, const Condition<T>& cond,
                    Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(ParamRegistry<T>& reg, const std::string& prefix) override;
  void trace(const Shape& in, FlopCounter& flops) const override;
  const Tensor<T>& latent_grad() const override { return dz_; }

  Param<T>& gamma_table() { return gamma_; }
  Param<T>& beta_table() { return beta_; }
  Param<T>& latent_proj() { return latent_; }

 private:
  ChannelNorm<T> norm_;
  int num_classes_;
  int z_dim_;
  bool latent_bias_;
  Param<T> gamma_;   // (1, 1, K, C)
  Param<T> beta_;    // (1, 1, K, C)
  Param<T> latent_;  // (1, 1, z_dim, 2C), empty unless latent_bias

  std::vector<int> classes_;
  Tensor<T> z_;
  Tensor<T> scale_;  // (B, 1, 1, C) effective per-sample scale
  Tensor<T> dz_;
};

/// Validates class ids against a table size; throws std::out_of_range.
void check_classes(std::span<const int> classes, int batch, int num_classes);

}  // namespace spn
