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
#include <random>

#include "spn/tensor.hpp"

namespace spn {

using Rng = std::mt19937_64;

template <typename T>
void normal_init(Tensor<T>& t, Rng& rng, T stddev);

/// Orthogonal initialization of a (..., out) weight viewed as a
/// (rest x out) matrix, scaled by `gain`.
template <typename T>
void orthogonal_init(Tensor<T>& t, Rng& rng, T gain = T(1));

}  // namespace spn
