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

#include "spn/training/losses.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace spn {
namespace {

// log(1 + exp(x)) without overflow.
template <typename T>
T softplus(T x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
void check_logits(const Tensor<T>& t, const char* what) {
  if (t.empty()) throw std::invalid_argument(std::string(what) + " logits are empty");
  require_finite(t, std::string(what) + " logits");
}

// Mean of f(v) over t with derivative f'(v) / N written into grad.
template <typename T, typename F>
T mean_with_grad(const Tensor<T>& t, Tensor<T>& grad, F f) {
  grad = Tensor<T>(t.shape());
  const T inv = T(1) / static_cast<T>(t.size());
  T sum = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto [v, d] = f(t[i]);
    sum += v;
    grad[i] = d * inv;
  }
  return sum * inv;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kHinge: return "hinge";
    case LossKind::kCe: return "ce";
    case LossKind::kLsgan: return "lsgan";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& text) {
  std::string s = text;
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "hinge") return LossKind::kHinge;
  if (s == "ce") return LossKind::kCe;
  if (s == "lsgan") return LossKind::kLsgan;
  throw std::invalid_argument("unknown loss '" + text + "' (hinge, ce, lsgan)");
}

template <typename T>
DLoss<T> discriminator_loss(LossKind kind, const Tensor<T>& real, const Tensor<T>& fake) {
  check_logits(real, "real");
  check_logits(fake, "fake");
  DLoss<T> out;
  struct VD {
    T v, d;
  };
  switch (kind) {
    case LossKind::kHinge:
      out.value = mean_with_grad(real, out.d_real, [](T r) {
                    return r < 1 ? VD{1 - r, -1} : VD{0, 0};
                  }) +
                  mean_with_grad(fake, out.d_fake, [](T f) {
                    return f > -1 ? VD{1 + f, 1} : VD{0, 0};
                  });
      break;
    case LossKind::kCe:
      out.value = mean_with_grad(real, out.d_real, [](T r) {
                    return VD{softplus(-r), -sigmoid(-r)};
                  }) +
                  mean_with_grad(fake, out.d_fake, [](T f) {
                    return VD{softplus(f), sigmoid(f)};
                  });
      break;
    case LossKind::kLsgan:
      out.value = mean_with_grad(real, out.d_real, [](T r) {
                    return VD{(r - 1) * (r - 1) / 2, r - 1};
                  }) +
                  mean_with_grad(fake, out.d_fake, [](T f) {
                    return VD{f * f / 2, f};
                  });
      break;
  }
  return out;
}

template <typename T>
GLoss<T> generator_loss(LossKind kind, const Tensor<T>& fake) {
  check_logits(fake, "fake");
  GLoss<T> out;
  struct VD {
    T v, d;
  };
  switch (kind) {
    case LossKind::kHinge:
      out.value = mean_with_grad(fake, out.d_fake, [](T f) { return VD{-f, -1}; });
      break;
    case LossKind::kCe:
      out.value = mean_with_grad(fake, out.d_fake, [](T f) {
        return VD{softplus(-f), -sigmoid(-f)};
      });
      break;
    case LossKind::kLsgan:
      out.value = mean_with_grad(fake, out.d_fake, [](T f) {
        return VD{(f - 1) * (f - 1) / 2, f - 1};
      });
      break;
  }
  return out;
}

template DLoss<float> discriminator_loss(LossKind, const Tensor<float>&, const Tensor<float>&);
template DLoss<double> discriminator_loss(LossKind, const Tensor<double>&, const Tensor<double>&);
template GLoss<float> generator_loss(LossKind, const Tensor<float>&);
template GLoss<double> generator_loss(LossKind, const Tensor<double>&);

}  // namespace spn
