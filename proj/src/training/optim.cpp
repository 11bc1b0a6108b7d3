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

#include "spn/training/optim.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace spn {

template <typename T>
Adam<T>::Adam(const ParamRegistry<T>& reg, AdamConfig cfg) : reg_(reg), cfg_(cfg) {
  for (const auto& e : reg_.params()) {
    m_.emplace_back(e.param->value.shape());
    v_.emplace_back(e.param->value.shape());
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++steps_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const T step = static_cast<T>(lr / c1);
  const T bias2 = static_cast<T>(1.0 / std::sqrt(c2));
  const T eps = static_cast<T>(cfg_.eps);
  const auto& params = reg_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& w = params[i].param->value;
    const Tensor<T>& g = params[i].param->grad;
    Tensor<T>& m = m_[i];
    Tensor<T>& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = static_cast<T>(b1) * m[j] + static_cast<T>(1 - b1) * g[j];
      v[j] = static_cast<T>(b2) * v[j] + static_cast<T>(1 - b2) * g[j] * g[j];
      w[j] -= step * m[j] / (std::sqrt(v[j]) * bias2 + eps);
    }
  }
}

template <typename T>
void Adam<T>::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.text[prefix + ".steps"] = std::to_string(steps_);
  const auto& params = reg_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if constexpr (std::is_same_v<T, float>) {
      ckpt.f32[prefix + ".m." + params[i].name] = m_[i];
      ckpt.f32[prefix + ".v." + params[i].name] = v_[i];
    } else {
      ckpt.f64[prefix + ".m." + params[i].name] = m_[i];
      ckpt.f64[prefix + ".v." + params[i].name] = v_[i];
    }
  }
}

template <typename T>
void Adam<T>::load(const Checkpoint& ckpt, const std::string& prefix) {
  steps_ = std::stoll(ckpt.get_text(prefix + ".steps"));
  const auto& table = [&]() -> const auto& {
    if constexpr (std::is_same_v<T, float>) {
      return ckpt.f32;
    } else {
      return ckpt.f64;
    }
  }();
  const auto& params = reg_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (auto [tag, dst] : {std::pair{".m.", &m_[i]}, std::pair{".v.", &v_[i]}}) {
      auto it = table.find(prefix + tag + params[i].name);
      if (it == table.end() || !(it->second.shape() == dst->shape())) {
        throw CheckpointError("optimizer state missing or mismatched for " + params[i].name);
      }
      *dst = it->second;
    }
  }
}

double LrSchedule::factor(std::int64_t iter) const {
  if (decay_last_iters <= 0) return 1.0;
  const std::int64_t start = total_iters - decay_last_iters;
  if (iter <= start) return 1.0;
  if (iter >= total_iters) return 0.0;
  return static_cast<double>(total_iters - iter) / static_cast<double>(decay_last_iters);
}

template <typename T>
double grad_norm(const ParamRegistry<T>& reg) {
  double acc = 0;
  for (const auto& e : reg.params()) {
    for (T g : e.param->grad.values()) acc += static_cast<double>(g) * g;
  }
  return std::sqrt(acc);
}

template class Adam<float>;
template class Adam<double>;
template double grad_norm(const ParamRegistry<float>&);
template double grad_norm(const ParamRegistry<double>&);

}  // namespace spn
