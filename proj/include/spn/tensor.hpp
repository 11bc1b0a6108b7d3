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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spn {

/// Four-dimensional extent in (batch, height, width, channels) order.
///
/// Weight tensors reuse the same four slots as (kernel_h, kernel_w, in, out);
/// vectors are stored as (1, 1, 1, n).
struct Shape {
  int n = 1;
  int h = 1;
  int w = 1;
  int c = 1;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * h * w * c;
  }
  std::size_t pixels() const { return static_cast<std::size_t>(n) * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

inline Shape vector_shape(int len) { return Shape{1, 1, 1, len}; }

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major NHWC tensor with value semantics.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(shape), data_(shape.size(), fill) {
    if (shape.n < 0 || shape.h < 0 || shape.w < 0 || shape.c < 0) {
      throw ShapeError("negative tensor extent " + shape.str());
    }
  }
  Tensor(Shape shape, std::vector<T> values)
      : shape_(shape), data_(std::move(values)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("value count " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::size_t index(int b, int y, int x, int ch) const {
    return ((static_cast<std::size_t>(b) * shape_.h + y) * shape_.w + x) *
               shape_.c +
           ch;
  }
  T& at(int b, int y, int x, int ch) { return data_[index(b, y, x, ch)]; }
  const T& at(int b, int y, int x, int ch) const {
    return data_[index(b, y, x, ch)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(T(0)); }

  /// Reinterprets the extent without touching values; sizes must agree.
  void reshape(Shape shape) {
    if (shape.size() != data_.size()) {
      throw ShapeError("cannot reshape " + shape_.str() + " to " +
                       shape.str());
    }
    shape_ = shape;
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor& operator+=(const Tensor& other) {
    check_same(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  void check_same(const Tensor& other, const char* what) const {
    if (!(shape_ == other.shape_)) {
      throw ShapeError(std::string(what) + ": shape " + shape_.str() +
                       " vs " + other.shape_.str());
    }
  }

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

inline std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(h) + "," +
         std::to_string(w) + "," + std::to_string(c) + ")";
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  a.check_same(b, "max_abs_diff");
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

template <typename T>
T max_abs(const Tensor<T>& a) {
  T m = 0;
  for (const T& v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

/// Throws NumericError naming `what` when any entry is NaN or infinite.
template <typename T>
void require_finite(const Tensor<T>& t, const std::string& what) {
  if (!t.all_finite()) {
    throw NumericError("non-finite values in " + what);
  }
}

enum class Mode { kTrain, kEval };

}  // namespace spn
