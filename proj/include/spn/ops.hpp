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

#include "spn/tensor.hpp"

// Stateless NHWC kernels shared by every layer. All convolutions are
// cross-correlations (the deep-learning convention) at stride 1 with zero
// padding of (k - 1) / 2 so that spatial size is preserved.
namespace spn::ops {

/// y = conv(x, weight) + bias; weight is (k, k, in, out), bias is (1,1,1,out)
/// or empty.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>* bias);

/// Accumulates weight/bias gradients (either may be null) and returns dL/dx.
/// Pass `want_dx = false` to skip the input gradient.
template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                          const Tensor<T>& dy, Tensor<T>* dweight,
                          Tensor<T>* dbias, bool want_dx = true);

/// Depth-wise convolution: output channel j only sees input channel j.
/// kernels is (k, k, 1, C) with k odd.
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernels);

/// Accumulates into dkernels (may be null) and returns dL/dx.
template <typename T>
Tensor<T> depthwise_conv2d_backward(const Tensor<T>& x,
                                    const Tensor<T>& kernels,
                                    const Tensor<T>& dy, Tensor<T>* dkernels);

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample_nearest2x_backward(const Tensor<T>& dy);

template <typename T>
Tensor<T> avg_pool2x2(const Tensor<T>& x);
template <typename T>
Tensor<T> avg_pool2x2_backward(const Tensor<T>& dy);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// Gradient of ReLU given its input.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> tanh(const Tensor<T>& x);

/// Sums over H and W: (B,H,W,C) -> (B,1,1,C).
template <typename T>
Tensor<T> global_sum_pool(const Tensor<T>& x);
template <typename T>
Tensor<T> global_sum_pool_backward(const Tensor<T>& dy, const Shape& in);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

/// Concatenates along the batch axis.
template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b);
/// Rows [begin, begin + count) of the batch axis.
template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int begin, int count);

}  // namespace spn::ops
