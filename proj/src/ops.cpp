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

#include "spn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace spn::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void check_kernel(const Shape& w, int in_channels, const char* what) {
  if (w.n != w.h || w.n % 2 == 0) {
    throw ShapeError(std::string(what) + ": kernel must be square with odd size, got " +
                     w.str());
  }
  if (w.w != in_channels) {
    throw ShapeError(std::string(what) + ": kernel expects " +
                     std::to_string(w.w) + " input channels, input has " +
                     std::to_string(in_channels));
  }
}

// Gathers one image's k x k neighbourhoods into (H*W, k*k*C) rows.
template <typename T>
void im2col(const T* img, int h, int w, int c, int k, T* col) {
  const int pad = (k - 1) / 2;
  const std::size_t row_len = static_cast<std::size_t>(k) * k * c;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T* row = col + (static_cast<std::size_t>(y) * w + x) * row_len;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = y + dy - pad;
        for (int dx = 0; dx < k; ++dx) {
          const int sx = x + dx - pad;
          T* dst = row + (static_cast<std::size_t>(dy) * k + dx) * c;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            std::fill(dst, dst + c, T(0));
          } else {
            const T* src = img + (static_cast<std::size_t>(sy) * w + sx) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int h, int w, int c, int k, T* img) {
  const int pad = (k - 1) / 2;
  const std::size_t row_len = static_cast<std::size_t>(k) * k * c;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T* row = col + (static_cast<std::size_t>(y) * w + x) * row_len;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = y + dy - pad;
        if (sy < 0 || sy >= h) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int sx = x + dx - pad;
          if (sx < 0 || sx >= w) continue;
          const T* src = row + (static_cast<std::size_t>(dy) * k + dx) * c;
          T* dst = img + (static_cast<std::size_t>(sy) * w + sx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>* bias) {
  const Shape& s = x.shape();
  const Shape& ws = weight.shape();
  check_kernel(ws, s.c, "conv2d");
  const int k = ws.n;
  const int cout = ws.c;
  if (bias && !bias->empty() && bias->size() != static_cast<std::size_t>(cout)) {
    throw ShapeError("conv2d: bias length mismatch");
  }
  Tensor<T> y(Shape{s.n, s.h, s.w, cout});
  const int hw = s.h * s.w;
  const int patch = k * k * s.c;
  ConstMapMat<T> wmat(weight.data(), patch, cout);
  if (k == 1) {
    ConstMapMat<T> xmat(x.data(), static_cast<Eigen::Index>(s.pixels()), s.c);
    MapMat<T> ymat(y.data(), static_cast<Eigen::Index>(s.pixels()), cout);
    ymat.noalias() = xmat * wmat;
  } else {
    std::vector<T> col(static_cast<std::size_t>(hw) * patch);
    for (int b = 0; b < s.n; ++b) {
      im2col(x.data() + static_cast<std::size_t>(b) * hw * s.c, s.h, s.w, s.c,
             k, col.data());
      ConstMapMat<T> cmat(col.data(), hw, patch);
      MapMat<T> ymat(y.data() + static_cast<std::size_t>(b) * hw * cout, hw,
                     cout);
      ymat.noalias() = cmat * wmat;
    }
  }
  if (bias && !bias->empty()) {
    const T* bv = bias->data();
    T* out = y.data();
    for (std::size_t p = 0; p < s.pixels(); ++p) {
      for (int o = 0; o < cout; ++o) out[p * cout + o] += bv[o];
    }
  }
  return y;
}

template <typename T>
Tensor<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                          const Tensor<T>& dy, Tensor<T>* dweight,
                          Tensor<T>* dbias, bool want_dx) {
  const Shape& s = x.shape();
  const Shape& ws = weight.shape();
  const int k = ws.n;
  const int cout = ws.c;
  if (!(dy.shape() == Shape{s.n, s.h, s.w, cout})) {
    throw ShapeError("conv2d_backward: upstream gradient " + dy.shape().str() +
                     " does not match forward output");
  }
  const int hw = s.h * s.w;
  const int patch = k * k * s.c;
  ConstMapMat<T> wmat(weight.data(), patch, cout);
  Tensor<T> dx;
  if (want_dx) dx = Tensor<T>(s);
  if (dbias) {
    T* db = dbias->data();
    const T* g = dy.data();
    for (std::size_t p = 0; p < s.pixels(); ++p) {
      for (int o = 0; o < cout; ++o) db[o] += g[p * cout + o];
    }
  }
  if (k == 1) {
    const auto rows = static_cast<Eigen::Index>(s.pixels());
    ConstMapMat<T> xmat(x.data(), rows, s.c);
    ConstMapMat<T> gmat(dy.data(), rows, cout);
    if (dweight) {
      MapMat<T> dw(dweight->data(), patch, cout);
      dw.noalias() += xmat.transpose() * gmat;
    }
    if (want_dx) {
      MapMat<T> dxm(dx.data(), rows, s.c);
      dxm.noalias() = gmat * wmat.transpose();
    }
    return dx;
  }
  std::vector<T> col(static_cast<std::size_t>(hw) * patch);
  for (int b = 0; b < s.n; ++b) {
    ConstMapMat<T> gmat(dy.data() + static_cast<std::size_t>(b) * hw * cout, hw,
                        cout);
    if (dweight) {
      im2col(x.data() + static_cast<std::size_t>(b) * hw * s.c, s.h, s.w, s.c,
             k, col.data());
      ConstMapMat<T> cmat(col.data(), hw, patch);
      MapMat<T> dw(dweight->data(), patch, cout);
      dw.noalias() += cmat.transpose() * gmat;
    }
    if (want_dx) {
      MapMat<T> dcol(col.data(), hw, patch);
      dcol.noalias() = gmat * wmat.transpose();
      col2im_add(col.data(), s.h, s.w, s.c, k,
                 dx.data() + static_cast<std::size_t>(b) * hw * s.c);
    }
  }
  return dx;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& kernels) {
  const Shape& s = x.shape();
  const Shape& ks = kernels.shape();
  if (ks.n != ks.h || ks.n % 2 == 0) {
    throw ShapeError("depthwise_conv2d: kernel size must be odd and square, got " +
                     ks.str());
  }
  if (ks.w != 1 || ks.c != s.c) {
    throw ShapeError("depthwise_conv2d: kernel bank " + ks.str() +
                     " does not match input channels " + std::to_string(s.c));
  }
  const int k = ks.n;
  const int pad = (k - 1) / 2;
  const int c = s.c;
  Tensor<T> y(s);
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        T* out = &y.at(b, i, j, 0);
        for (int dy = 0; dy < k; ++dy) {
          const int si = i + dy - pad;
          if (si < 0 || si >= s.h) continue;
          for (int dx = 0; dx < k; ++dx) {
            const int sj = j + dx - pad;
            if (sj < 0 || sj >= s.w) continue;
            const T* in = &x.at(b, si, sj, 0);
            const T* kw = kernels.data() + (static_cast<std::size_t>(dy) * k + dx) * c;
            for (int ch = 0; ch < c; ++ch) out[ch] += in[ch] * kw[ch];
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> depthwise_conv2d_backward(const Tensor<T>& x,
                                    const Tensor<T>& kernels,
                                    const Tensor<T>& dy, Tensor<T>* dkernels) {
  const Shape& s = x.shape();
  x.check_same(dy, "depthwise_conv2d_backward");
  const int k = kernels.shape().n;
  const int pad = (k - 1) / 2;
  const int c = s.c;
  Tensor<T> dx(s);
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const T* g = &dy.at(b, i, j, 0);
        for (int ky = 0; ky < k; ++ky) {
          const int si = i + ky - pad;
          if (si < 0 || si >= s.h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int sj = j + kx - pad;
            if (sj < 0 || sj >= s.w) continue;
            const std::size_t tap = (static_cast<std::size_t>(ky) * k + kx) * c;
            const T* kw = kernels.data() + tap;
            T* gin = &dx.at(b, si, sj, 0);
            for (int ch = 0; ch < c; ++ch) gin[ch] += g[ch] * kw[ch];
            if (dkernels) {
              const T* in = &x.at(b, si, sj, 0);
              T* gk = dkernels->data() + tap;
              for (int ch = 0; ch < c; ++ch) gk[ch] += g[ch] * in[ch];
            }
          }
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  const Shape& s = x.shape();
  Tensor<T> y(Shape{s.n, 2 * s.h, 2 * s.w, s.c});
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < 2 * s.h; ++i) {
      for (int j = 0; j < 2 * s.w; ++j) {
        const T* src = &x.at(b, i / 2, j / 2, 0);
        std::copy(src, src + s.c, &y.at(b, i, j, 0));
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_nearest2x_backward(const Tensor<T>& dy) {
  const Shape& s = dy.shape();
  Tensor<T> dx(Shape{s.n, s.h / 2, s.w / 2, s.c});
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const T* g = &dy.at(b, i, j, 0);
        T* dst = &dx.at(b, i / 2, j / 2, 0);
        for (int ch = 0; ch < s.c; ++ch) dst[ch] += g[ch];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> avg_pool2x2(const Tensor<T>& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("avg_pool2x2: odd spatial extent " + s.str());
  }
  Tensor<T> y(Shape{s.n, s.h / 2, s.w / 2, s.c});
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const T* src = &x.at(b, i, j, 0);
        T* dst = &y.at(b, i / 2, j / 2, 0);
        for (int ch = 0; ch < s.c; ++ch) dst[ch] += T(0.25) * src[ch];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> avg_pool2x2_backward(const Tensor<T>& dy) {
  const Shape& s = dy.shape();
  Tensor<T> dx(Shape{s.n, 2 * s.h, 2 * s.w, s.c});
  for (int b = 0; b < s.n; ++b) {
    for (int i = 0; i < 2 * s.h; ++i) {
      for (int j = 0; j < 2 * s.w; ++j) {
        const T* g = &dy.at(b, i / 2, j / 2, 0);
        T* dst = &dx.at(b, i, j, 0);
        for (int ch = 0; ch < s.c; ++ch) dst[ch] = T(0.25) * g[ch];
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  x.check_same(dy, "relu_backward");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    // Branching keeps exp() from overflowing for large |v|.
    if (v >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T(1) + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

template <typename T>
Tensor<T> global_sum_pool(const Tensor<T>& x) {
  const Shape& s = x.shape();
  Tensor<T> y(Shape{s.n, 1, 1, s.c});
  for (int b = 0; b < s.n; ++b) {
    T* dst = &y.at(b, 0, 0, 0);
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) {
        const T* src = &x.at(b, i, j, 0);
        for (int ch = 0; ch < s.c; ++ch) dst[ch] += src[ch];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_sum_pool_backward(const Tensor<T>& dy, const Shape& in) {
  Tensor<T> dx(in);
  for (int b = 0; b < in.n; ++b) {
    const T* g = &dy.at(b, 0, 0, 0);
    for (int i = 0; i < in.h; ++i) {
      for (int j = 0; j < in.w; ++j) {
        std::copy(g, g + in.c, &dx.at(b, i, j, 0));
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> y = a;
  y += b;
  return y;
}

template <typename T>
Tensor<T> concat_batch(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.h != sb.h || sa.w != sb.w || sa.c != sb.c) {
    throw ShapeError("concat_batch: " + sa.str() + " vs " + sb.str());
  }
  Tensor<T> y(Shape{sa.n + sb.n, sa.h, sa.w, sa.c});
  std::copy(a.values().begin(), a.values().end(), y.data());
  std::copy(b.values().begin(), b.values().end(), y.data() + a.size());
  return y;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& x, int begin, int count) {
  const Shape& s = x.shape();
  if (begin < 0 || count < 0 || begin + count > s.n) {
    throw ShapeError("slice_batch: range out of bounds for " + s.str());
  }
  const std::size_t per = static_cast<std::size_t>(s.h) * s.w * s.c;
  Tensor<T> y(Shape{count, s.h, s.w, s.c});
  std::copy(x.data() + begin * per, x.data() + (begin + count) * per, y.data());
  return y;
}

#define SPN_INSTANTIATE_OPS(T)                                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&,               \
                            const Tensor<T>*);                                \
  template Tensor<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,      \
                                     const Tensor<T>&, Tensor<T>*,            \
                                     Tensor<T>*, bool);                       \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> depthwise_conv2d_backward(                               \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*);      \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                    \
  template Tensor<T> upsample_nearest2x_backward(const Tensor<T>&);           \
  template Tensor<T> avg_pool2x2(const Tensor<T>&);                           \
  template Tensor<T> avg_pool2x2_backward(const Tensor<T>&);                  \
  template Tensor<T> relu(const Tensor<T>&);                                  \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> sigmoid(const Tensor<T>&);                               \
  template Tensor<T> tanh(const Tensor<T>&);                                  \
  template Tensor<T> global_sum_pool(const Tensor<T>&);                       \
  template Tensor<T> global_sum_pool_backward(const Tensor<T>&,               \
                                              const Shape&);                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> concat_batch(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> slice_batch(const Tensor<T>&, int, int);

SPN_INSTANTIATE_OPS(float)
SPN_INSTANTIATE_OPS(double)

}  // namespace spn::ops
