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

#include "spn/core/spn_layer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "spn/init.hpp"
#include "spn/ops.hpp"

namespace spn {

// ---------------------------------------------------------------------------
// SelfLatentMask

template <typename T>
SelfLatentMask<T>::SelfLatentMask(Tensor<T> raw, bool inverted)
    : raw_(std::move(raw)), inverted_(inverted) {
  for (T v : raw_.values()) {
    if (!(v > T(0) && v < T(1))) {
      throw NumericError("self-latent mask entry outside (0, 1)");
    }
  }
}

template <typename T>
Tensor<T> SelfLatentMask<T>::values() const {
  if (!inverted_) return raw_;
  Tensor<T> out(raw_.shape());
  for (std::size_t i = 0; i < raw_.size(); ++i) out[i] = T(1) - raw_[i];
  return out;
}

template <typename T>
SelfLatentMask<T> invert_mask(const SelfLatentMask<T>& m) {
  return SelfLatentMask<T>(m.raw(), !m.inverted());
}

// ---------------------------------------------------------------------------

void SpnOptions::validate(int channels) const {
  if (channels < 1) throw std::invalid_argument("SPN needs >= 1 channel");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("SPN kernel size must be odd, got " +
                                std::to_string(kernel_size));
  }
  if (conditional) {
    if (num_classes < 1) {
      throw std::invalid_argument("conditional SPN needs num_classes >= 1");
    }
    if (embed_dim < 1) {
      throw std::invalid_argument("conditional SPN needs embed_dim >= 1");
    }
    if (latent_bias && z_dim < 1) {
      throw std::invalid_argument("latent bias needs z_dim >= 1");
    }
  } else if (per_class_kernels) {
    throw std::invalid_argument("per-class kernels require a conditional SPN");
  }
  if (per_class_kernels && affine_conv != AffineConv::kDepthwise) {
    throw std::invalid_argument("per-class kernels require depth-wise banks");
  }
}

namespace {

template <typename T>
T mask_floor() {
  return std::numeric_limits<T>::epsilon();
}

}  // namespace

template <typename T>
SpnLayer<T>::SpnLayer(int channels, SpnOptions options, std::uint64_t seed)
    : channels_(channels),
      mask_channels_(options.mask_channels == MaskChannels::kSingle ? 1
                                                                     : channels),
      options_(options),
      norm_(channels) {
  options_.validate(channels);
  const int k = options_.kernel_size;
  const int c = channels_;
  const int cm = mask_channels_;
  const bool sn = options_.spectral_norm;
  mask_w_ = SnParam<T>(Shape{1, 1, c, cm}, sn);
  mask_b_ = Param<T>(vector_shape(cm));
  if (options_.conditional) {
    mask_norm_ = std::make_unique<ConditionalBatchNorm<T>>(
        cm, options_.num_classes, 0, false);
  } else {
    mask_norm_ = std::make_unique<BatchNorm<T>>(cm);
  }
  const Shape bank_shape = options_.affine_conv == AffineConv::kDepthwise
                               ? Shape{k, k, 1, c}
                               : Shape{k, k, cm, c};
  for (auto& b : banks_) b = SnParam<T>(bank_shape, sn);
  if (options_.per_class_kernels) {
    for (auto& cb : class_banks_) {
      cb = Param<T>(Shape{k, k, options_.num_classes, c});
    }
  }
  if (options_.affine_bias) {
    gamma_bias_ = Param<T>(vector_shape(c));
    beta_bias_ = Param<T>(vector_shape(c));
  }
  if (options_.conditional) {
    embedding_ = Param<T>(Shape{1, 1, options_.num_classes, options_.embed_dim});
    kernel_scale_ = Param<T>(Shape{1, 1, options_.embed_dim, 4 * c});
    if (options_.latent_bias) {
      latent_proj_ = Param<T>(Shape{1, 1, options_.z_dim, 2 * c});
    }
  }
  reset_identity();
  Rng rng(seed);
  orthogonal_init(mask_w_.param().value, rng, T(0.02));
  if (options_.conditional) normal_init(embedding_.value, rng, T(0.02));
}

template <typename T>
void SpnLayer<T>::reset_identity() {
  const int k = options_.kernel_size;
  const int c = channels_;
  const int centre = (k / 2) * k + k / 2;
  for (auto& b : banks_) b.param().value.set_zero();
  for (int bank : {kGammaFg, kGammaBg}) {
    Tensor<T>& w = banks_[bank].param().value;
    if (options_.affine_conv == AffineConv::kDepthwise) {
      for (int j = 0; j < c; ++j) w[static_cast<std::size_t>(centre) * c + j] = T(1);
    } else {
      const int cm = mask_channels_;
      for (int j = 0; j < c; ++j) {
        const int src = cm == 1 ? 0 : j;
        w[(static_cast<std::size_t>(centre) * cm + src) * c + j] = T(1);
      }
    }
  }
  for (auto& cb : class_banks_) cb.value.set_zero();
  gamma_bias_.value.set_zero();
  beta_bias_.value.set_zero();
  kernel_scale_.value.set_zero();
  latent_proj_.value.set_zero();
}

template <typename T>
void SpnLayer<T>::validate_condition(const Shape& s,
                                     const Condition<T>& cond) const {
  if (s.c != channels_) {
    throw ShapeError("SPN layer has " + std::to_string(channels_) +
                     " channels, input is " + s.str());
  }
  if (!options_.conditional) {
    if (cond.has_classes()) {
      throw std::invalid_argument(
          "class condition given to an unconditional SPN layer");
    }
    return;
  }
  if (!cond.has_classes()) {
    throw std::invalid_argument("conditional SPN layer requires class ids");
  }
  check_classes(cond.classes, s.n, options_.num_classes);
  if (options_.latent_bias) {
    if (cond.z == nullptr) {
      throw std::invalid_argument("conditional SPN layer requires z");
    }
    if (!(cond.z->shape() == Shape{s.n, 1, 1, options_.z_dim})) {
      throw ShapeError("latent vector has shape " + cond.z->shape().str() +
                       ", expected (B,1,1," + std::to_string(options_.z_dim) +
                       ")");
    }
  }
}

template <typename T>
Condition<T> SpnLayer<T>::mask_condition(const Condition<T>& cond) const {
  Condition<T> c;
  if (options_.conditional) c.classes = cond.classes;
  return c;
}

template <typename T>
SelfLatentMask<T> SpnLayer<T>::build_mask(const Tensor<T>& x,
                                          const Condition<T>& cond, Mode mode) {
  validate_condition(x.shape(), cond);
  mode_ = mode;
  mask_weight_ = &mask_w_.weight(mode);
  Tensor<T> p = ops::conv2d(x, *mask_weight_, &mask_b_.value);
  Tensor<T> q = mask_norm_->forward(p, mask_condition(cond), mode);
  mask_ = ops::sigmoid(q);
  const T lo = mask_floor<T>();
  const T hi = T(1) - lo;
  for (T& v : mask_.values()) v = std::clamp(v, lo, hi);
  return SelfLatentMask<T>(mask_);
}

template <typename T>
Tensor<T> SpnLayer<T>::broadcast_mask(const Tensor<T>& m) const {
  if (options_.affine_conv == AffineConv::kStandard || mask_channels_ == channels_) {
    return m;
  }
  const Shape& s = m.shape();
  Tensor<T> out(Shape{s.n, s.h, s.w, channels_});
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    std::fill_n(out.data() + p * channels_, channels_, m[p]);
  }
  return out;
}

template <typename T>
Tensor<T> SpnLayer<T>::bank_forward(int bank, const Tensor<T>& src) const {
  const Tensor<T>& w = *bank_weights_[bank];
  if (options_.affine_conv == AffineConv::kStandard) {
    return ops::conv2d<T>(src, w, nullptr);
  }
  if (!options_.per_class_kernels) return ops::depthwise_conv2d(src, w);
  const Shape& s = src.shape();
  const int k = options_.kernel_size;
  const int c = channels_;
  const int nk = options_.num_classes;
  const Tensor<T>& table = class_banks_[bank].value;
  Tensor<T> out(s);
  const std::size_t per = static_cast<std::size_t>(s.h) * s.w * c;
  for (int b = 0; b < s.n; ++b) {
    Tensor<T> kernel = w;
    const int cls = classes_[b];
    for (int t = 0; t < k * k; ++t) {
      for (int j = 0; j < c; ++j) {
        kernel[static_cast<std::size_t>(t) * c + j] +=
            table[(static_cast<std::size_t>(t) * nk + cls) * c + j];
      }
    }
    Tensor<T> r = ops::depthwise_conv2d(ops::slice_batch(src, b, 1), kernel);
    std::copy(r.data(), r.data() + per, out.data() + b * per);
  }
  return out;
}

template <typename T>
AffineField<T> SpnLayer<T>::estimate_affine(const SelfLatentMask<T>& m,
                                            const SelfLatentMask<T>& m_inv,
                                            const Condition<T>& cond) {
  const Shape& ms = m.shape();
  if (!(m_inv.shape() == ms) || ms.c != mask_channels_) {
    throw ShapeError("mask shapes " + ms.str() + " / " + m_inv.shape().str() +
                     " do not match a layer with " +
                     std::to_string(mask_channels_) + " mask channels");
  }
  const Shape s{ms.n, ms.h, ms.w, channels_};
  validate_condition(s, cond);
  const int c = channels_;
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  classes_.assign(cond.classes.begin(), cond.classes.end());
  if (options_.conditional && options_.latent_bias) z_ = *cond.z;

  const Tensor<T> fg = broadcast_mask(m.values());
  const Tensor<T> bg = broadcast_mask(m_inv.values());
  sources_ = {fg, bg, fg, bg};
  for (int i = 0; i < 4; ++i) {
    bank_weights_[i] = &banks_[i].weight(mode_);
    base_[i] = bank_forward(i, sources_[i]);
  }

  if (options_.conditional) {
    const int e = options_.embed_dim;
    factors_ = Tensor<T>(Shape{s.n, 1, 1, 4 * c}, T(1));
    for (int b = 0; b < s.n; ++b) {
      const T* emb = embedding_.value.data() + static_cast<std::size_t>(classes_[b]) * e;
      T* f = factors_.data() + static_cast<std::size_t>(b) * 4 * c;
      for (int a = 0; a < e; ++a) {
        const T* row = kernel_scale_.value.data() + static_cast<std::size_t>(a) * 4 * c;
        for (int o = 0; o < 4 * c; ++o) f[o] += emb[a] * row[o];
      }
    }
  }

  AffineField<T> field{Tensor<T>(s), Tensor<T>(s)};
  for (int b = 0; b < s.n; ++b) {
    std::vector<T> add_g(c, T(0)), add_b(c, T(0));
    if (options_.affine_bias) {
      for (int j = 0; j < c; ++j) {
        add_g[j] = gamma_bias_.value[j];
        add_b[j] = beta_bias_.value[j];
      }
    }
    if (options_.conditional && options_.latent_bias) {
      const int zd = options_.z_dim;
      for (int a = 0; a < zd; ++a) {
        const T za = z_[static_cast<std::size_t>(b) * zd + a];
        const T* row = latent_proj_.value.data() + static_cast<std::size_t>(a) * 2 * c;
        for (int j = 0; j < c; ++j) {
          add_g[j] += za * row[j];
          add_b[j] += za * row[c + j];
        }
      }
    }
    const T* f = options_.conditional
                     ? factors_.data() + static_cast<std::size_t>(b) * 4 * c
                     : nullptr;
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t base = (b * hw + p) * c;
      for (int j = 0; j < c; ++j) {
        const std::size_t i = base + j;
        if (f) {
          field.gamma[i] = f[j] * base_[0][i] + f[c + j] * base_[1][i] + add_g[j];
          field.beta[i] =
              f[2 * c + j] * base_[2][i] + f[3 * c + j] * base_[3][i] + add_b[j];
        } else {
          field.gamma[i] = base_[0][i] + base_[1][i] + add_g[j];
          field.beta[i] = base_[2][i] + base_[3][i] + add_b[j];
        }
      }
    }
  }
  field_ = field;
  return field;
}

template <typename T>
Tensor<T> SpnLayer<T>::forward(const Tensor<T>& x, const Condition<T>& cond,
                               Mode mode) {
  validate_condition(x.shape(), cond);
  x_ = x;
  Tensor<T> xhat = norm_.forward(x, mode);
  SelfLatentMask<T> m = build_mask(x, cond, mode);
  AffineField<T> field = estimate_affine(m, invert_mask(m), cond);
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = field.gamma[i] * xhat[i] + field.beta[i];
  }
  return y;
}

template <typename T>
Tensor<T> SpnLayer<T>::backward(const Tensor<T>& dy) {
  const Tensor<T>& xhat = norm_.output();
  xhat.check_same(dy, "SPN backward");
  const Shape& s = dy.shape();
  const int c = channels_;
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;

  Tensor<T> dxhat(s);
  const Tensor<T>& dbeta = dy;
  Tensor<T> dgamma(s);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dgamma[i] = dy[i] * xhat[i];
    dxhat[i] = dy[i] * field_.gamma[i];
  }

  // Per-sample, per-channel spatial sums of dgamma / dbeta.
  std::vector<T> sum_g(static_cast<std::size_t>(s.n) * c, T(0));
  std::vector<T> sum_b(static_cast<std::size_t>(s.n) * c, T(0));
  for (int b = 0; b < s.n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t base = (b * hw + p) * c;
      for (int j = 0; j < c; ++j) {
        sum_g[static_cast<std::size_t>(b) * c + j] += dgamma[base + j];
        sum_b[static_cast<std::size_t>(b) * c + j] += dbeta[base + j];
      }
    }
  }
  if (options_.affine_bias) {
    for (int b = 0; b < s.n; ++b) {
      for (int j = 0; j < c; ++j) {
        gamma_bias_.grad[j] += sum_g[static_cast<std::size_t>(b) * c + j];
        beta_bias_.grad[j] += sum_b[static_cast<std::size_t>(b) * c + j];
      }
    }
  }
  dz_ = Tensor<T>();
  if (options_.conditional && options_.latent_bias) {
    const int zd = options_.z_dim;
    dz_ = Tensor<T>(Shape{s.n, 1, 1, zd});
    for (int b = 0; b < s.n; ++b) {
      for (int a = 0; a < zd; ++a) {
        const T za = z_[static_cast<std::size_t>(b) * zd + a];
        T* grow = latent_proj_.grad.data() + static_cast<std::size_t>(a) * 2 * c;
        const T* wrow = latent_proj_.value.data() + static_cast<std::size_t>(a) * 2 * c;
        T acc = 0;
        for (int j = 0; j < c; ++j) {
          const T gg = sum_g[static_cast<std::size_t>(b) * c + j];
          const T gb = sum_b[static_cast<std::size_t>(b) * c + j];
          grow[j] += za * gg;
          grow[c + j] += za * gb;
          acc += wrow[j] * gg + wrow[c + j] * gb;
        }
        dz_[static_cast<std::size_t>(b) * zd + a] = acc;
      }
    }
  }

  // Through the (optionally class-scaled) kernel banks.
  Tensor<T> dfactor;
  if (options_.conditional) dfactor = Tensor<T>(factors_.shape());
  std::array<Tensor<T>, 4> dsrc;
  for (int i = 0; i < 4; ++i) {
    const Tensor<T>& g = i < 2 ? dgamma : dbeta;
    Tensor<T> dbase = g;
    if (options_.conditional) {
      for (int b = 0; b < s.n; ++b) {
        const std::size_t frow = static_cast<std::size_t>(b) * 4 * c + static_cast<std::size_t>(i) * c;
        for (std::size_t p = 0; p < hw; ++p) {
          const std::size_t base = (b * hw + p) * c;
          for (int j = 0; j < c; ++j) {
            dfactor[frow + j] += g[base + j] * base_[i][base + j];
            dbase[base + j] = g[base + j] * factors_[frow + j];
          }
        }
      }
    }
    const Tensor<T>& w = *bank_weights_[i];
    Tensor<T> dw(w.shape());
    if (options_.affine_conv == AffineConv::kStandard) {
      dsrc[i] = ops::conv2d_backward<T>(sources_[i], w, dbase, &dw, nullptr);
    } else if (!options_.per_class_kernels) {
      dsrc[i] = ops::depthwise_conv2d_backward(sources_[i], w, dbase, &dw);
    } else {
      const int k = options_.kernel_size;
      const int nk = options_.num_classes;
      Tensor<T>& table_grad = class_banks_[i].grad;
      const Tensor<T>& table = class_banks_[i].value;
      dsrc[i] = Tensor<T>(sources_[i].shape());
      const std::size_t per = hw * c;
      for (int b = 0; b < s.n; ++b) {
        const int cls = classes_[b];
        Tensor<T> kernel = w;
        for (int t = 0; t < k * k; ++t) {
          for (int j = 0; j < c; ++j) {
            kernel[static_cast<std::size_t>(t) * c + j] +=
                table[(static_cast<std::size_t>(t) * nk + cls) * c + j];
          }
        }
        Tensor<T> dk(w.shape());
        Tensor<T> ds = ops::depthwise_conv2d_backward(
            ops::slice_batch(sources_[i], b, 1), kernel,
            ops::slice_batch(dbase, b, 1), &dk);
        std::copy(ds.data(), ds.data() + per, dsrc[i].data() + b * per);
        dw += dk;
        for (int t = 0; t < k * k; ++t) {
          for (int j = 0; j < c; ++j) {
            table_grad[(static_cast<std::size_t>(t) * nk + cls) * c + j] +=
                dk[static_cast<std::size_t>(t) * c + j];
          }
        }
      }
    }
    banks_[i].backward(dw);
  }

  if (options_.conditional) {
    const int e = options_.embed_dim;
    for (int b = 0; b < s.n; ++b) {
      const std::size_t erow = static_cast<std::size_t>(classes_[b]) * e;
      const T* df = dfactor.data() + static_cast<std::size_t>(b) * 4 * c;
      for (int a = 0; a < e; ++a) {
        const T ea = embedding_.value[erow + a];
        T* grow = kernel_scale_.grad.data() + static_cast<std::size_t>(a) * 4 * c;
        const T* wrow = kernel_scale_.value.data() + static_cast<std::size_t>(a) * 4 * c;
        T acc = 0;
        for (int o = 0; o < 4 * c; ++o) {
          grow[o] += ea * df[o];
          acc += wrow[o] * df[o];
        }
        embedding_.grad[erow + a] += acc;
      }
    }
  }

  // Mask gradient: fg banks see m, bg banks see 1 - m.
  const Shape& msh = mask_.shape();
  Tensor<T> dmask(msh);
  const Tensor<T>& d0 = dsrc[0];
  const bool reduce = d0.shape().c != msh.c;
  for (std::size_t p = 0; p < msh.pixels(); ++p) {
    if (reduce) {
      T acc = 0;
      for (int j = 0; j < c; ++j) {
        const std::size_t i = p * c + j;
        acc += dsrc[0][i] + dsrc[2][i] - dsrc[1][i] - dsrc[3][i];
      }
      dmask[p] = acc;
    } else {
      for (int j = 0; j < msh.c; ++j) {
        const std::size_t i = p * msh.c + j;
        dmask[i] = dsrc[0][i] + dsrc[2][i] - dsrc[1][i] - dsrc[3][i];
      }
    }
  }
  for (std::size_t i = 0; i < dmask.size(); ++i) {
    dmask[i] *= mask_[i] * (T(1) - mask_[i]);
  }
  Tensor<T> dp = mask_norm_->backward(dmask);
  const Tensor<T>& w = *mask_weight_;
  Tensor<T> dw(w.shape());
  Tensor<T> dx_proj = ops::conv2d_backward(x_, w, dp, &dw, &mask_b_.grad);
  mask_w_.backward(dw);

  Tensor<T> dx = norm_.backward(dxhat);
  dx += dx_proj;
  return dx;
}

template <typename T>
void SpnLayer<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  mask_w_.collect(reg, join_name(prefix, "mask_proj.weight"));
  reg.add(join_name(prefix, "mask_proj.bias"), mask_b_);
  mask_norm_->collect(reg, join_name(prefix, "mask_norm"));
  static const char* kNames[4] = {"gamma_fg", "gamma_bg", "beta_fg", "beta_bg"};
  for (int i = 0; i < 4; ++i) {
    banks_[i].collect(reg, join_name(prefix, kNames[i]));
    if (options_.per_class_kernels) {
      reg.add(join_name(prefix, std::string(kNames[i]) + "_class"), class_banks_[i]);
    }
  }
  if (options_.affine_bias) {
    reg.add(join_name(prefix, "gamma_bias"), gamma_bias_);
    reg.add(join_name(prefix, "beta_bias"), beta_bias_);
  }
  if (options_.conditional) {
    reg.add(join_name(prefix, "class_embedding"), embedding_);
    reg.add(join_name(prefix, "kernel_scale_proj"), kernel_scale_);
    if (options_.latent_bias) {
      reg.add(join_name(prefix, "latent_bias_proj"), latent_proj_);
    }
  }
  norm_.collect(reg, prefix);
}

template <typename T>
void SpnLayer<T>::trace(const Shape& in, FlopCounter& flops) const {
  const auto n = static_cast<std::int64_t>(in.size());
  const auto pix = static_cast<std::int64_t>(in.pixels());
  const std::int64_t c = channels_;
  const std::int64_t cm = mask_channels_;
  const std::int64_t k2 = static_cast<std::int64_t>(options_.kernel_size) *
                          options_.kernel_size;
  norm_.trace(in, flops);
  flops.macs(pix * c * cm);  // 1x1 projection
  flops.ops(pix * cm);       // projection bias
  mask_norm_->trace(Shape{in.n, in.h, in.w, static_cast<int>(cm)}, flops);
  flops.ops(pix * cm);       // inverted mask
  if (options_.affine_conv == AffineConv::kDepthwise) {
    flops.macs(4 * n * k2);
  } else {
    flops.macs(4 * pix * k2 * cm * c);
  }
  flops.ops(2 * n);  // fg + bg sums for gamma and beta
  if (options_.affine_bias) flops.ops(2 * n);
  if (options_.conditional) {
    flops.macs(in.n * static_cast<std::int64_t>(options_.embed_dim) * 4 * c);
    flops.ops(4 * n);  // channel scaling of the bank outputs
    if (options_.latent_bias) {
      flops.macs(in.n * static_cast<std::int64_t>(options_.z_dim) * 2 * c);
      flops.ops(2 * n);
    }
  }
  flops.macs(n);  // gamma * x_hat + beta
}

template class SelfLatentMask<float>;
template class SelfLatentMask<double>;
template SelfLatentMask<float> invert_mask(const SelfLatentMask<float>&);
template SelfLatentMask<double> invert_mask(const SelfLatentMask<double>&);
template class SpnLayer<float>;
template class SpnLayer<double>;

}  // namespace spn
