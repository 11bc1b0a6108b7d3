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

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "spn/init.hpp"
#include "spn/tensor.hpp"

namespace spn::testing {

inline Tensor<double> random_tensor(const Shape& s, std::uint64_t seed,
                                    double stddev = 1.0) {
  Rng rng(seed);
  Tensor<double> t(s);
  normal_init(t, rng, stddev);
  return t;
}

inline Tensor<double> uniform_tensor(const Shape& s, std::uint64_t seed,
                                     double lo, double hi) {
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(s);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

/// Per-channel mean and biased variance, two passes.
inline std::pair<std::vector<double>, std::vector<double>> two_pass_stats(
    const Tensor<double>& x) {
  const int c = x.shape().c;
  const double n = static_cast<double>(x.shape().pixels());
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    for (int j = 0; j < c; ++j) mean[j] += x[p * c + j];
  }
  for (double& m : mean) m /= n;
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    for (int j = 0; j < c; ++j) {
      const double d = x[p * c + j] - mean[j];
      var[j] += d * d;
    }
  }
  for (double& v : var) v /= n;
  return {mean, var};
}

inline Tensor<double> naive_normalize(const Tensor<double>& x, double eps = 1e-5) {
  auto [mean, var] = two_pass_stats(x);
  const int c = x.shape().c;
  Tensor<double> out(x.shape());
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    for (int j = 0; j < c; ++j) {
      out[p * c + j] = (x[p * c + j] - mean[j]) / std::sqrt(var[j] + eps);
    }
  }
  return out;
}

/// Zero-padded depth-wise cross-correlation, kernels (k, k, 1, C).
inline Tensor<double> naive_depthwise(const Tensor<double>& x,
                                      const Tensor<double>& k) {
  const Shape& s = x.shape();
  const int ks = k.shape().n;
  const int pad = ks / 2;
  Tensor<double> out(s);
  for (int b = 0; b < s.n; ++b)
    for (int y = 0; y < s.h; ++y)
      for (int xx = 0; xx < s.w; ++xx)
        for (int j = 0; j < s.c; ++j)
          for (int dy = 0; dy < ks; ++dy)
            for (int dx = 0; dx < ks; ++dx) {
              const int iy = y + dy - pad;
              const int ix = xx + dx - pad;
              if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
              out.at(b, y, xx, j) += x.at(b, iy, ix, j) * k.at(dy, dx, 0, j);
            }
  return out;
}

/// Zero-padded dense cross-correlation, weight (k, k, in, out).
inline Tensor<double> naive_conv2d(const Tensor<double>& x,
                                   const Tensor<double>& w,
                                   const Tensor<double>* bias) {
  const Shape& s = x.shape();
  const int ks = w.shape().n;
  const int pad = ks / 2;
  const int out_c = w.shape().c;
  Tensor<double> out(Shape{s.n, s.h, s.w, out_c});
  for (int b = 0; b < s.n; ++b)
    for (int y = 0; y < s.h; ++y)
      for (int xx = 0; xx < s.w; ++xx)
        for (int o = 0; o < out_c; ++o) {
          double acc = bias ? (*bias)[o] : 0.0;
          for (int dy = 0; dy < ks; ++dy)
            for (int dx = 0; dx < ks; ++dx) {
              const int iy = y + dy - pad;
              const int ix = xx + dx - pad;
              if (iy < 0 || iy >= s.h || ix < 0 || ix >= s.w) continue;
              for (int i = 0; i < s.c; ++i) {
                acc += x.at(b, iy, ix, i) * w.at(dy, dx, i, o);
              }
            }
          out.at(b, y, xx, o) = acc;
        }
  return out;
}

inline double naive_sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace spn::testing
