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

#include "spn/tensor.hpp"

namespace spn {

enum class LossKind {
  kHinge,
  kCe,     // non-saturating cross-entropy
  kLsgan,  // least squares, targets 1 (real) and 0 (fake)
};

std::string to_string(LossKind kind);
/// Accepts hinge, ce, lsgan.
LossKind parse_loss_kind(const std::string& text);

/// Batch-mean loss and its gradients with respect to the logits.
template <typename T>
struct DLoss {
  T value = 0;
  Tensor<T> d_real;
  Tensor<T> d_fake;
};

template <typename T>
struct GLoss {
  T value = 0;
  Tensor<T> d_fake;
};

///   hinge: mean(max(0, 1 - r)) + mean(max(0, 1 + f))
///   ce:    mean(softplus(-r)) + mean(softplus(f))
///   lsgan: mean((r - 1)^2) / 2 + mean(f^2) / 2
template <typename T>
DLoss<T> discriminator_loss(LossKind kind, const Tensor<T>& real_logits,
                            const Tensor<T>& fake_logits);

///   hinge: -mean(f)
///   ce:    mean(softplus(-f))
///   lsgan: mean((f - 1)^2) / 2
template <typename T>
GLoss<T> generator_loss(LossKind kind, const Tensor<T>& fake_logits);

}  // namespace spn
