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

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spn/core/normalization.hpp"
#include "spn/flops.hpp"
#include "spn/models/spectral_norm.hpp"
#include "spn/param.hpp"
#include "spn/tensor.hpp"

namespace spn {

/// Soft foreground mask m with entries strictly inside (0, 1).
///
/// The mask stores the sigmoid output once and a polarity bit; inversion
/// flips the polarity, so invert(invert(m)) reproduces m bit for bit and
/// m + invert(m) evaluates to exactly 1 in IEEE round-to-nearest arithmetic.
template <typename T>
class SelfLatentMask {
 public:
  SelfLatentMask() = default;
  /// Throws NumericError if any entry lies outside (0, 1).
  explicit SelfLatentMask(Tensor<T> raw, bool inverted = false);

  const Shape& shape() const { return raw_.shape(); }
  std::size_t size() const { return raw_.size(); }
  T operator[](std::size_t i) const {
    return inverted_ ? T(1) - raw_[i] : raw_[i];
  }
  T at(int b, int y, int x, int c) const { return (*this)[raw_.index(b, y, x, c)]; }
  bool inverted() const { return inverted_; }
  const Tensor<T>& raw() const { return raw_; }

  /// Materialized mask values.
  Tensor<T> values() const;

 private:
  Tensor<T> raw_;
  bool inverted_ = false;
};

/// Returns 1 - m elementwise.
template <typename T>
SelfLatentMask<T> invert_mask(const SelfLatentMask<T>& m);

/// Pixel-wise scale and shift fields, same shape as the modulated features.
template <typename T>
struct AffineField {
  Tensor<T> gamma;
  Tensor<T> beta;
};

enum class AffineConv { kDepthwise, kStandard };
enum class MaskChannels { kPerChannel, kSingle };

struct SpnOptions {
  int kernel_size = 3;
  MaskChannels mask_channels = MaskChannels::kPerChannel;
  AffineConv affine_conv = AffineConv::kDepthwise;
  /// Per-channel bias on the gamma and beta estimates.
  bool affine_bias = true;
  /// Spectral normalization of the mask projection and kernel banks.
  bool spectral_norm = false;

  bool conditional = false;
  int num_classes = 0;
  int embed_dim = 128;
  int z_dim = 0;
  /// Add a linear map of z to gamma and beta (conditional only).
  bool latent_bias = true;
  /// Add a learned per-class residual to every kernel bank.
  bool per_class_kernels = false;

  /// Throws std::invalid_argument on an inconsistent combination.
  void validate(int channels) const;
};

/// Self pixel-wise normalization layer (conditional when options.conditional).
///
///   x_hat = channel_norm(x)
///   m     = sigmoid(norm(conv1x1(x)))          norm = BN, or cBN if conditional
///   gamma = m (*) w1_gamma + (1 - m) (*) w2_gamma + b_gamma [+ latent]
///   beta  = m (*) w1_beta  + (1 - m) (*) w2_beta  + b_beta  [+ latent]
///   y     = gamma * x_hat + beta
///
/// (*) is a depth-wise convolution with zero padding. In the conditional
/// layer every kernel bank is scaled per channel by (1 + s), where s is a
/// linear map of the class embedding, and latent adds a linear map of z.
///
/// Default initialization makes the layer an exact channel-wise normalization:
/// gamma banks hold a centred unit tap, beta banks are zero, biases and
/// conditional projections are zero.
template <typename T>
class SpnLayer final : public NormLayer<T> {
 public:
  enum Bank { kGammaFg = 0, kGammaBg = 1, kBetaFg = 2, kBetaBg = 3 };

  /// `seed` drives the random mask-projection initialization.
  SpnLayer(int channels, SpnOptions options, std::uint64_t seed = 0);

  Tensor<T> forward(const Tensor<T>& x, const Condition<T>& cond,
                    Mode mode) override;
  Tensor<T> backward(const Tensor<T>& dy) override;
  void collect(ParamRegistry<T>& reg, const std::string& prefix) override;
  void trace(const Shape& in, FlopCounter& flops) const override;
  const Tensor<T>& latent_grad() const override { return dz_; }

  /// Mask branch only: sigmoid(norm(conv1x1(x))). Updates mask-branch
  /// running statistics in train mode.
  SelfLatentMask<T> build_mask(const Tensor<T>& x, const Condition<T>& cond,
                               Mode mode);
  /// Affine estimation from a mask and its inverse.
  AffineField<T> estimate_affine(const SelfLatentMask<T>& m,
                                 const SelfLatentMask<T>& m_inv,
                                 const Condition<T>& cond);

  /// Resets the affine-estimation parameters to the identity-at-init
  /// configuration. The mask branch is left alone: with gamma banks that
  /// sum m and 1 - m the output does not depend on it.
  void reset_identity();

  int channels() const { return channels_; }
  int mask_channels() const { return mask_channels_; }
  const SpnOptions& options() const { return options_; }

  /// Mask (sigmoid output) from the most recent forward pass.
  const Tensor<T>& last_mask() const { return mask_; }
  const Tensor<T>& last_gamma() const { return field_.gamma; }
  const Tensor<T>& last_beta() const { return field_.beta; }

  ChannelNorm<T>& norm() { return norm_; }
  NormLayer<T>& mask_norm() { return *mask_norm_; }
  SnParam<T>& mask_proj_weight() { return mask_w_; }
  Param<T>& mask_proj_bias() { return mask_b_; }
  SnParam<T>& bank(Bank b) { return banks_[b]; }
  Param<T>& class_bank(Bank b) { return class_banks_[b]; }
  Param<T>& gamma_bias() { return gamma_bias_; }
  Param<T>& beta_bias() { return beta_bias_; }
  Param<T>& class_embedding() { return embedding_; }
  Param<T>& kernel_scale_proj() { return kernel_scale_; }
  Param<T>& latent_bias_proj() { return latent_proj_; }

 private:
  void validate_condition(const Shape& s, const Condition<T>& cond) const;
  Condition<T> mask_condition(const Condition<T>& cond) const;
  Tensor<T> bank_forward(int bank, const Tensor<T>& src) const;
  Tensor<T> broadcast_mask(const Tensor<T>& m) const;

  int channels_;
  int mask_channels_;
  SpnOptions options_;

  ChannelNorm<T> norm_;
  SnParam<T> mask_w_;  // (1, 1, C, Cm)
  Param<T> mask_b_;    // (1, 1, 1, Cm)
  std::unique_ptr<NormLayer<T>> mask_norm_;
  std::array<SnParam<T>, 4> banks_;  // (k, k, 1, C) or (k, k, Cm, C)
  std::array<Param<T>, 4> class_banks_;  // (k, k, K, C) when per-class
  Param<T> gamma_bias_;
  Param<T> beta_bias_;
  Param<T> embedding_;     // (1, 1, K, E)
  Param<T> kernel_scale_;  // (1, 1, E, 4C)
  Param<T> latent_proj_;   // (1, 1, z_dim, 2C)

  // Forward cache.
  Mode mode_ = Mode::kTrain;
  Tensor<T> x_;
  const Tensor<T>* mask_weight_ = nullptr;
  Tensor<T> mask_;  // raw sigmoid output, (B, H, W, Cm)
  std::array<Tensor<T>, 4> sources_;  // mask or inverse, broadcast to C
  std::array<Tensor<T>, 4> base_;     // unscaled bank outputs
  std::array<const Tensor<T>*, 4> bank_weights_{};
  Tensor<T> factors_;  // (B, 1, 1, 4C): 1 + s, conditional only
  std::vector<int> classes_;
  Tensor<T> z_;
  AffineField<T> field_;
  Tensor<T> dz_;
};

}  // namespace spn
