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

#include "spn/core/normalization.hpp"

#include <cmath>
#include <stdexcept>

namespace spn {

void check_classes(std::span<const int> classes, int batch, int num_classes) {
  if (static_cast<int>(classes.size()) != batch) {
    throw ShapeError("expected " + std::to_string(batch) + " class ids, got " +
                     std::to_string(classes.size()));
  }
  for (int c : classes) {
    if (c < 0 || c >= num_classes) {
      throw std::out_of_range("class id " + std::to_string(c) +
                              " outside [0, " + std::to_string(num_classes) +
                              ")");
    }
  }
}

template <typename T>
RunningStats<T>::RunningStats(int channels, T momentum, T epsilon)
    : mean(vector_shape(channels), T(0)),
      var(vector_shape(channels), T(1)),
      updates(vector_shape(1), T(0)),
      momentum(momentum),
      epsilon(epsilon) {
  if (!(momentum > T(0) && momentum < T(1))) {
    throw std::invalid_argument("running-stats momentum must lie in (0, 1)");
  }
  if (!(epsilon > T(0))) {
    throw std::invalid_argument("normalization epsilon must be positive");
  }
}

template <typename T>
ChannelNorm<T>::ChannelNorm(int channels, T momentum, T epsilon)
    : stats_(channels, momentum, epsilon) {}

template <typename T>
Tensor<T> ChannelNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  const Shape& s = x.shape();
  const int c = s.c;
  if (c != channels()) {
    throw ShapeError("channel norm expects " + std::to_string(channels()) +
                     " channels, input is " + s.str());
  }
  require_finite(x, "channel-norm input");
  mode_ = mode;
  inv_std_.assign(c, T(0));
  std::vector<T> mean(c, T(0));
  const std::size_t pix = s.pixels();
  if (mode == Mode::kTrain) {
    std::vector<T> var(c, T(0));
    const T* in = x.data();
    for (std::size_t p = 0; p < pix; ++p) {
      for (int j = 0; j < c; ++j) mean[j] += in[p * c + j];
    }
    for (int j = 0; j < c; ++j) mean[j] /= static_cast<T>(pix);
    for (std::size_t p = 0; p < pix; ++p) {
      for (int j = 0; j < c; ++j) {
        const T d = in[p * c + j] - mean[j];
        var[j] += d * d;
      }
    }
    const T keep = stats_.momentum;
    for (int j = 0; j < c; ++j) {
      var[j] /= static_cast<T>(pix);
      inv_std_[j] = T(1) / std::sqrt(var[j] + stats_.epsilon);
      stats_.mean[j] = keep * stats_.mean[j] + (T(1) - keep) * mean[j];
      stats_.var[j] = keep * stats_.var[j] + (T(1) - keep) * var[j];
    }
    stats_.updates[0] += T(1);
  } else {
    if (!stats_.initialized()) {
      throw UninitializedStatisticsError(
          "uninitialized statistics: eval-mode normalization before any "
          "train-mode update");
    }
    for (int j = 0; j < c; ++j) {
      mean[j] = stats_.mean[j];
      inv_std_[j] = T(1) / std::sqrt(stats_.var[j] + stats_.epsilon);
    }
  }
  xhat_ = Tensor<T>(s);
  const T* in = x.data();
  T* out = xhat_.data();
  for (std::size_t p = 0; p < pix; ++p) {
    for (int j = 0; j < c; ++j) {
      out[p * c + j] = (in[p * c + j] - mean[j]) * inv_std_[j];
    }
  }
  return xhat_;
}

template <typename T>
Tensor<T> ChannelNorm<T>::backward(const Tensor<T>& dxhat) const {
  xhat_.check_same(dxhat, "channel norm backward");
  const Shape& s = dxhat.shape();
  const int c = s.c;
  const std::size_t pix = s.pixels();
  Tensor<T> dx(s);
  const T* g = dxhat.data();
  const T* xh = xhat_.data();
  T* out = dx.data();
  if (mode_ == Mode::kEval) {
    for (std::size_t p = 0; p < pix; ++p) {
      for (int j = 0; j < c; ++j) out[p * c + j] = g[p * c + j] * inv_std_[j];
    }
    return dx;
  }
  std::vector<T> mean_g(c, T(0)), mean_gx(c, T(0));
  for (std::size_t p = 0; p < pix; ++p) {
    for (int j = 0; j < c; ++j) {
      mean_g[j] += g[p * c + j];
      mean_gx[j] += g[p * c + j] * xh[p * c + j];
    }
  }
  for (int j = 0; j < c; ++j) {
    mean_g[j] /= static_cast<T>(pix);
    mean_gx[j] /= static_cast<T>(pix);
  }
  for (std::size_t p = 0; p < pix; ++p) {
    for (int j = 0; j < c; ++j) {
      const std::size_t i = p * c + j;
      out[i] = inv_std_[j] * (g[i] - mean_g[j] - xh[i] * mean_gx[j]);
    }
  }
  return dx;
}

template <typename T>
void ChannelNorm<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  reg.add_buffer(join_name(prefix, "running_mean"), stats_.mean);
  reg.add_buffer(join_name(prefix, "running_var"), stats_.var);
  reg.add_buffer(join_name(prefix, "num_updates"), stats_.updates);
}

template <typename T>
void ChannelNorm<T>::trace(const Shape& in, FlopCounter& flops) const {
  flops.ops(2 * static_cast<std::int64_t>(in.size()));
}

template <typename T>
std::pair<Tensor<T>, RunningStats<T>> channelwise_normalize(
    const Tensor<T>& x, RunningStats<T> stats, Mode mode) {
  ChannelNorm<T> norm(x.shape().c, stats.momentum, stats.epsilon);
  norm.stats() = std::move(stats);
  Tensor<T> y = norm.forward(x, mode);
  return {std::move(y), norm.stats()};
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(int channels)
    : norm_(channels),
      gamma_(vector_shape(channels), T(1)),
      beta_(vector_shape(channels), T(0)) {}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, const Condition<T>&,
                                Mode mode) {
  Tensor<T> y = norm_.forward(x, mode);
  const int c = y.shape().c;
  T* v = y.data();
  for (std::size_t p = 0; p < y.shape().pixels(); ++p) {
    for (int j = 0; j < c; ++j) {
      v[p * c + j] = gamma_.value[j] * v[p * c + j] + beta_.value[j];
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& dy) {
  const Tensor<T>& xhat = norm_.output();
  xhat.check_same(dy, "batch norm backward");
  const int c = dy.shape().c;
  Tensor<T> dxhat(dy.shape());
  for (std::size_t p = 0; p < dy.shape().pixels(); ++p) {
    for (int j = 0; j < c; ++j) {
      const std::size_t i = p * c + j;
      gamma_.grad[j] += dy[i] * xhat[i];
      beta_.grad[j] += dy[i];
      dxhat[i] = dy[i] * gamma_.value[j];
    }
  }
  return norm_.backward(dxhat);
}

template <typename T>
void BatchNorm<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  reg.add(join_name(prefix, "gamma"), gamma_);
  reg.add(join_name(prefix, "beta"), beta_);
  norm_.collect(reg, prefix);
}

template <typename T>
void BatchNorm<T>::trace(const Shape& in, FlopCounter& flops) const {
  norm_.trace(in, flops);
  flops.macs(static_cast<std::int64_t>(in.size()));
}

// ---------------------------------------------------------------------------

template <typename T>
ConditionalBatchNorm<T>::ConditionalBatchNorm(int channels, int num_classes,
                                              int z_dim, bool latent_bias)
    : norm_(channels),
      num_classes_(num_classes),
      z_dim_(z_dim),
      latent_bias_(latent_bias),
      gamma_(Shape{1, 1, num_classes, channels}, T(1)),
      beta_(Shape{1, 1, num_classes, channels}, T(0)) {
  if (num_classes < 1) {
    throw std::invalid_argument("conditional batch norm needs >= 1 class");
  }
  if (latent_bias) {
    if (z_dim < 1) throw std::invalid_argument("latent bias needs z_dim >= 1");
    latent_ = Param<T>(Shape{1, 1, z_dim, 2 * channels}, T(0));
  }
}

template <typename T>
Tensor<T> ConditionalBatchNorm<T>::forward(const Tensor<T>& x,
                                           const Condition<T>& cond,
                                           Mode mode) {
  const Shape& s = x.shape();
  const int c = s.c;
  check_classes(cond.classes, s.n, num_classes_);
  classes_.assign(cond.classes.begin(), cond.classes.end());
  if (latent_bias_) {
    if (cond.z == nullptr || !(cond.z->shape() == Shape{s.n, 1, 1, z_dim_})) {
      throw ShapeError("ccBN requires z of shape (B,1,1," +
                       std::to_string(z_dim_) + ")");
    }
    z_ = *cond.z;
  }
  Tensor<T> y = norm_.forward(x, mode);
  scale_ = Tensor<T>(Shape{s.n, 1, 1, c});
  std::vector<T> shift(static_cast<std::size_t>(s.n) * c);
  for (int b = 0; b < s.n; ++b) {
    const std::size_t row = static_cast<std::size_t>(classes_[b]) * c;
    for (int j = 0; j < c; ++j) {
      T g = gamma_.value[row + j];
      T bt = beta_.value[row + j];
      if (latent_bias_) {
        for (int k = 0; k < z_dim_; ++k) {
          const T zk = z_[static_cast<std::size_t>(b) * z_dim_ + k];
          g += zk * latent_.value[static_cast<std::size_t>(k) * 2 * c + j];
          bt += zk * latent_.value[static_cast<std::size_t>(k) * 2 * c + c + j];
        }
      }
      scale_[static_cast<std::size_t>(b) * c + j] = g;
      shift[static_cast<std::size_t>(b) * c + j] = bt;
    }
  }
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  T* v = y.data();
  for (int b = 0; b < s.n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      T* px = v + (b * hw + p) * c;
      for (int j = 0; j < c; ++j) {
        px[j] = scale_[static_cast<std::size_t>(b) * c + j] * px[j] +
                shift[static_cast<std::size_t>(b) * c + j];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> ConditionalBatchNorm<T>::backward(const Tensor<T>& dy) {
  const Tensor<T>& xhat = norm_.output();
  xhat.check_same(dy, "conditional batch norm backward");
  const Shape& s = dy.shape();
  const int c = s.c;
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  Tensor<T> dxhat(s);
  std::vector<T> dgamma(static_cast<std::size_t>(s.n) * c, T(0));
  std::vector<T> dbeta(static_cast<std::size_t>(s.n) * c, T(0));
  for (int b = 0; b < s.n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t base = (b * hw + p) * c;
      for (int j = 0; j < c; ++j) {
        const std::size_t i = base + j;
        dgamma[static_cast<std::size_t>(b) * c + j] += dy[i] * xhat[i];
        dbeta[static_cast<std::size_t>(b) * c + j] += dy[i];
        dxhat[i] = dy[i] * scale_[static_cast<std::size_t>(b) * c + j];
      }
    }
  }
  if (latent_bias_) dz_ = Tensor<T>(Shape{s.n, 1, 1, z_dim_});
  for (int b = 0; b < s.n; ++b) {
    const std::size_t row = static_cast<std::size_t>(classes_[b]) * c;
    for (int j = 0; j < c; ++j) {
      gamma_.grad[row + j] += dgamma[static_cast<std::size_t>(b) * c + j];
      beta_.grad[row + j] += dbeta[static_cast<std::size_t>(b) * c + j];
    }
    if (!latent_bias_) continue;
    for (int k = 0; k < z_dim_; ++k) {
      const T zk = z_[static_cast<std::size_t>(b) * z_dim_ + k];
      T acc = 0;
      for (int j = 0; j < c; ++j) {
        const std::size_t wg = static_cast<std::size_t>(k) * 2 * c + j;
        const T gg = dgamma[static_cast<std::size_t>(b) * c + j];
        const T gb = dbeta[static_cast<std::size_t>(b) * c + j];
        latent_.grad[wg] += zk * gg;
        latent_.grad[wg + c] += zk * gb;
        acc += latent_.value[wg] * gg + latent_.value[wg + c] * gb;
      }
      dz_[static_cast<std::size_t>(b) * z_dim_ + k] = acc;
    }
  }
  return norm_.backward(dxhat);
}

template <typename T>
void ConditionalBatchNorm<T>::collect(ParamRegistry<T>& reg,
                                      const std::string& prefix) {
  reg.add(join_name(prefix, "gamma_table"), gamma_);
  reg.add(join_name(prefix, "beta_table"), beta_);
  if (latent_bias_) reg.add(join_name(prefix, "latent_proj"), latent_);
  norm_.collect(reg, prefix);
}

template <typename T>
void ConditionalBatchNorm<T>::trace(const Shape& in, FlopCounter& flops) const {
  norm_.trace(in, flops);
  flops.macs(static_cast<std::int64_t>(in.size()));
  if (latent_bias_) {
    flops.macs(static_cast<std::int64_t>(in.n) * z_dim_ * 2 * in.c);
  }
}

template struct RunningStats<float>;
template struct RunningStats<double>;
template class ChannelNorm<float>;
template class ChannelNorm<double>;
template class BatchNorm<float>;
template class BatchNorm<double>;
template class ConditionalBatchNorm<float>;
template class ConditionalBatchNorm<double>;
template std::pair<Tensor<float>, RunningStats<float>> channelwise_normalize(
    const Tensor<float>&, RunningStats<float>, Mode);
template std::pair<Tensor<double>, RunningStats<double>> channelwise_normalize(
    const Tensor<double>&, RunningStats<double>, Mode);

}  // namespace spn
