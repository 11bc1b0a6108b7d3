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

#include "spn/models/layers.hpp"

#include <limits>
#include <stdexcept>

#include "spn/ops.hpp"

namespace spn {

template <typename T>
Conv2d<T>::Conv2d(int in, int out, int kernel_size, bool bias, bool spectral)
    : in_(in),
      out_(out),
      k_(kernel_size),
      has_bias_(bias),
      weight_(Shape{kernel_size, kernel_size, in, out}, spectral) {
  if (in < 1 || out < 1) throw std::invalid_argument("conv needs >= 1 channel");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("conv kernel size must be odd");
  }
  if (bias) bias_ = Param<T>(vector_shape(out));
}

template <typename T>
void Conv2d<T>::init(Rng& rng, T gain) {
  orthogonal_init(weight_.param().value, rng, gain);
  bias_.value.set_zero();
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode mode) {
  x_ = x;
  w_ = &weight_.weight(mode);
  return ops::conv2d(x, *w_, has_bias_ ? &bias_.value : nullptr);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
  Tensor<T> dw(w_->shape());
  Tensor<T> dx = ops::conv2d_backward(x_, *w_, dy, &dw,
                                      has_bias_ ? &bias_.grad : nullptr);
  weight_.backward(dw);
  return dx;
}

template <typename T>
void Conv2d<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  weight_.collect(reg, join_name(prefix, "weight"));
  if (has_bias_) reg.add(join_name(prefix, "bias"), bias_);
}

template <typename T>
Shape Conv2d<T>::trace(const Shape& in, FlopCounter& flops) const {
  const Shape out{in.n, in.h, in.w, out_};
  const auto pix = static_cast<std::int64_t>(in.pixels());
  flops.macs(pix * k_ * k_ * in_ * out_);
  if (has_bias_) flops.ops(pix * out_);
  return out;
}

template <typename T>
Dense<T>::Dense(int in, int out, bool bias, bool spectral)
    : conv_(in, out, 1, bias, spectral) {}

template <typename T>
void Dense<T>::init(Rng& rng, T gain) {
  conv_.init(rng, gain);
}

// ---------------------------------------------------------------------------

template <typename T>
SpatialAttention<T>::SpatialAttention(bool spectral, int kernel_size)
    : conv_(2, 1, kernel_size, true, spectral) {}

template <typename T>
void SpatialAttention<T>::init(Rng& rng) {
  conv_.init(rng);
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(const Tensor<T>& x, Mode mode) {
  const Shape& s = x.shape();
  const int c = s.c;
  x_ = x;
  Tensor<T> pooled(Shape{s.n, s.h, s.w, 2});
  argmax_.assign(s.pixels(), 0);
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    const T* px = x.data() + p * c;
    T sum = 0;
    int best = 0;
    for (int j = 0; j < c; ++j) {
      sum += px[j];
      if (px[j] > px[best]) best = j;
    }
    pooled[p * 2] = sum / static_cast<T>(c);
    pooled[p * 2 + 1] = px[best];
    argmax_[p] = best;
  }
  gate_ = ops::sigmoid(conv_.forward(pooled, mode));
  Tensor<T> y(s);
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    for (int j = 0; j < c; ++j) y[p * c + j] = x[p * c + j] * gate_[p];
  }
  return y;
}

template <typename T>
Tensor<T> SpatialAttention<T>::backward(const Tensor<T>& dy) {
  const Shape& s = x_.shape();
  const int c = s.c;
  Tensor<T> dx(s);
  Tensor<T> dlogit(gate_.shape());
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    T acc = 0;
    for (int j = 0; j < c; ++j) {
      const std::size_t i = p * c + j;
      dx[i] = dy[i] * gate_[p];
      acc += dy[i] * x_[i];
    }
    dlogit[p] = acc * gate_[p] * (T(1) - gate_[p]);
  }
  Tensor<T> dpooled = conv_.backward(dlogit);
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    const T dmean = dpooled[p * 2] / static_cast<T>(c);
    for (int j = 0; j < c; ++j) dx[p * c + j] += dmean;
    dx[p * c + argmax_[p]] += dpooled[p * 2 + 1];
  }
  return dx;
}

template <typename T>
Shape SpatialAttention<T>::trace(const Shape& in, FlopCounter& flops) const {
  const auto n = static_cast<std::int64_t>(in.size());
  flops.ops(2 * n);  // channel mean and max
  conv_.trace(Shape{in.n, in.h, in.w, 2}, flops);
  flops.ops(n);  // gating product
  return in;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class Dense<float>;
template class Dense<double>;
template class SpatialAttention<float>;
template class SpatialAttention<double>;

}  // namespace spn
