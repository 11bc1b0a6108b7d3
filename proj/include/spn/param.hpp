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
#include <string>
#include <vector>

#include "spn/tensor.hpp"

namespace spn {

/// A learnable tensor and its accumulated gradient.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(Shape shape, T fill = T(0))
      : value(shape, fill), grad(shape, T(0)) {}

  void zero_grad() { grad.set_zero(); }
  std::size_t size() const { return value.size(); }
};

/// Flat, ordered view of a model's learnables and persistent buffers.
///
/// Buffers (running statistics, power-iteration vectors) are serialized with
/// the parameters but are neither optimized nor counted as parameters.
template <typename T>
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Param<T>* param;
  };
  struct Buffer {
    std::string name;
    Tensor<T>* tensor;
  };

  void add(std::string name, Param<T>& p) {
    params_.push_back({std::move(name), &p});
  }
  void add_buffer(std::string name, Tensor<T>& t) {
    buffers_.push_back({std::move(name), &t});
  }

  const std::vector<Entry>& params() const { return params_; }
  const std::vector<Buffer>& buffers() const { return buffers_; }

  Param<T>* find(const std::string& name) const {
    for (const auto& e : params_) {
      if (e.name == name) return e.param;
    }
    return nullptr;
  }
  Tensor<T>* find_buffer(const std::string& name) const {
    for (const auto& b : buffers_) {
      if (b.name == name) return b.tensor;
    }
    return nullptr;
  }

  std::int64_t count() const {
    std::int64_t n = 0;
    for (const auto& e : params_) n += static_cast<std::int64_t>(e.param->size());
    return n;
  }

  void zero_grad() const {
    for (const auto& e : params_) e.param->zero_grad();
  }

 private:
  std::vector<Entry> params_;
  std::vector<Buffer> buffers_;
};

/// Copies every parameter and buffer of `src` whose name and shape match an
/// entry in `dst`. Returns the number of tensors copied.
template <typename T>
int copy_matching(const ParamRegistry<T>& src, const ParamRegistry<T>& dst) {
  int copied = 0;
  for (const auto& e : dst.params()) {
    if (Param<T>* s = src.find(e.name);
        s && s->value.shape() == e.param->value.shape()) {
      e.param->value = s->value;
      ++copied;
    }
  }
  for (const auto& b : dst.buffers()) {
    if (Tensor<T>* s = src.find_buffer(b.name);
        s && s->shape() == b.tensor->shape()) {
      *b.tensor = *s;
      ++copied;
    }
  }
  return copied;
}

inline std::string join_name(const std::string& prefix,
                             const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace spn
