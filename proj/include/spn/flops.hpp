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

namespace spn {

/// How a fused multiply-add is charged when counting FLOPs.
enum class FlopConvention {
  kMac2,  // one multiply-add = 2 FLOPs
  kMac1,  // one multiply-add = 1 FLOP
};

/// Accumulates analytic operation counts during a shape-only model trace.
///
/// Convolutions, dense layers, normalizations, pooling, residual sums and the
/// SPN internals are charged; pointwise activations (ReLU, Tanh, sigmoid) and
/// nearest-neighbour upsampling are free.
class FlopCounter {
 public:
  explicit FlopCounter(FlopConvention convention) : convention_(convention) {}

  void macs(std::int64_t n) {
    total_ += convention_ == FlopConvention::kMac2 ? 2 * n : n;
  }
  void ops(std::int64_t n) { total_ += n; }

  std::int64_t total() const { return total_; }
  FlopConvention convention() const { return convention_; }

 private:
  FlopConvention convention_;
  std::int64_t total_ = 0;
};

}  // namespace spn
