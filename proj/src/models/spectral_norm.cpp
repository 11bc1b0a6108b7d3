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

#include "spn/models/spectral_norm.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace spn {
namespace {

thread_local bool g_freeze_power_iteration = false;

template <typename T>
constexpr T kSigmaFloor = T(1e-12);

// Returns the Euclidean norm and scales `v` to unit length when nonzero.
template <typename T>
T normalize_in_place(std::vector<T>& v) {
  T sq = 0;
  for (T x : v) sq += x * x;
  const T norm = std::sqrt(sq);
  if (norm > kSigmaFloor<T>) {
    for (T& x : v) x /= norm;
  }
  return norm;
}

}  // namespace

FreezePowerIteration::FreezePowerIteration()
    : previous_(g_freeze_power_iteration) {
  g_freeze_power_iteration = true;
}
FreezePowerIteration::~FreezePowerIteration() {
  g_freeze_power_iteration = previous_;
}
bool FreezePowerIteration::active() { return g_freeze_power_iteration; }

template <typename T>
SpectralState<T>::SpectralState(int out_features)
    : u(vector_shape(out_features)) {
  std::mt19937_64 eng(0x5eedULL + static_cast<unsigned>(out_features));
  std::vector<T> v(out_features);
  for (T& x : v) x = static_cast<T>((eng() >> 11) * 0x1.0p-53) - T(0.5);
  normalize_in_place(v);
  for (int i = 0; i < out_features; ++i) u[i] = v[i];
}

template <typename T>
SpectralResult<T> spectral_normalize(const Tensor<T>& weight,
                                     SpectralState<T>& state, int iters) {
  const int out = weight.shape().c;
  if (out < 1 || weight.size() == 0) {
    throw ShapeError("spectral_normalize: empty weight");
  }
  const std::size_t rest = weight.size() / out;
  if (state.u.size() != static_cast<std::size_t>(out)) {
    state = SpectralState<T>(out);
  }
  if (iters < 0) throw std::invalid_argument("spectral_normalize: iters < 0");
  const T* m = weight.data();  // row-major (rest x out)
  std::vector<T> u(state.u.values().begin(), state.u.values().end());
  std::vector<T> v(rest, T(0));

  auto update_v = [&] {
    for (std::size_t r = 0; r < rest; ++r) {
      T acc = 0;
      const T* row = m + r * out;
      for (int o = 0; o < out; ++o) acc += row[o] * u[o];
      v[r] = acc;
    }
    normalize_in_place(v);
  };
  for (int it = 0; it < iters; ++it) {
    update_v();
    std::vector<T> nu(out, T(0));
    for (std::size_t r = 0; r < rest; ++r) {
      const T* row = m + r * out;
      for (int o = 0; o < out; ++o) nu[o] += row[o] * v[r];
    }
    if (normalize_in_place(nu) > kSigmaFloor<T>) u = std::move(nu);
  }
  if (iters == 0) update_v();

  T sigma = 0;
  for (std::size_t r = 0; r < rest; ++r) {
    const T* row = m + r * out;
    T acc = 0;
    for (int o = 0; o < out; ++o) acc += row[o] * u[o];
    sigma += v[r] * acc;
  }
  for (int o = 0; o < out; ++o) state.u[o] = u[o];

  SpectralResult<T> res;
  res.sigma = sigma;
  res.v = Tensor<T>(vector_shape(static_cast<int>(rest)), std::move(v));
  res.weight = weight;
  const T denom = std::max(sigma, kSigmaFloor<T>);
  for (T& x : res.weight.values()) x /= denom;
  return res;
}

template <typename T>
SnParam<T>::SnParam(Shape shape, bool spectral, T fill)
    : param_(shape, fill), spectral_(spectral) {
  if (spectral_) state_ = SpectralState<T>(shape.c);
}

template <typename T>
const Tensor<T>& SnParam<T>::weight(Mode mode) {
  if (!spectral_) return param_.value;
  const int iters =
      (mode == Mode::kTrain && !FreezePowerIteration::active()) ? 1 : 0;
  SpectralResult<T> r = spectral_normalize(param_.value, state_, iters);
  effective_ = std::move(r.weight);
  v_ = std::move(r.v);
  sigma_ = r.sigma;
  return effective_;
}

template <typename T>
void SnParam<T>::backward(const Tensor<T>& grad_effective) {
  param_.value.check_same(grad_effective, "spectral norm backward");
  if (!spectral_) {
    param_.grad += grad_effective;
    return;
  }
  const int out = param_.value.shape().c;
  const std::size_t rest = param_.value.size() / out;
  if (sigma_ <= kSigmaFloor<T>) {
    for (std::size_t i = 0; i < grad_effective.size(); ++i) {
      param_.grad[i] += grad_effective[i] / kSigmaFloor<T>;
    }
    return;
  }
  // d(W/sigma) with d sigma / dW = v u^T in (rest x out) orientation.
  T inner = 0;
  for (std::size_t i = 0; i < grad_effective.size(); ++i) {
    inner += grad_effective[i] * effective_[i];
  }
  for (std::size_t r = 0; r < rest; ++r) {
    for (int o = 0; o < out; ++o) {
      const std::size_t i = r * out + o;
      param_.grad[i] +=
          (grad_effective[i] - inner * v_[r] * state_.u[o]) / sigma_;
    }
  }
}

template <typename T>
void SnParam<T>::collect(ParamRegistry<T>& reg, const std::string& name) {
  reg.add(name, param_);
  if (spectral_) reg.add_buffer(name + "_sn_u", state_.u);
}

template struct SpectralState<float>;
template struct SpectralState<double>;
template class SnParam<float>;
template class SnParam<double>;
template SpectralResult<float> spectral_normalize(const Tensor<float>&,
                                                  SpectralState<float>&, int);
template SpectralResult<double> spectral_normalize(const Tensor<double>&,
                                                   SpectralState<double>&, int);

}  // namespace spn
