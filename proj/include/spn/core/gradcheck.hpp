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
#include <functional>
#include <string>
#include <vector>

#include "spn/core/spn_layer.hpp"
#include "spn/tensor.hpp"

namespace spn::gradcheck {

struct Entry {
  std::string name;
  double max_abs_error = 0;  // max |analytic - numeric|
  double scale = 0;          // max(|analytic|, |numeric|) over the tensor
  double rel_error = 0;      // max_abs_error / max(scale, floor)
  bool passed = false;
};

struct Report {
  std::string op;
  std::vector<Entry> entries;
  double seconds = 0;

  bool passed() const;
  double worst() const;
};

struct Settings {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Gradients smaller than this are below finite-difference resolution
  /// (a bias followed by batch normalization has an exactly zero gradient).
  double abs_floor = 1e-8;
};

/// Central finite differences of a scalar loss against one tensor.
///
/// `loss` must re-evaluate the full forward pass from the current contents of
/// `value`. The relative error of a tensor is its largest absolute deviation
/// divided by the largest gradient magnitude in either estimate, with that
/// magnitude floored at abs_floor / tolerance.
Entry compare(const std::string& name, Tensor<double>& value,
              const Tensor<double>& analytic,
              const std::function<double()>& loss, const Settings& settings);

/// Fills every parameter of the layer with random values so that no path is
/// trivially zero (the identity initialization severs the mask branch).
void randomize(ParamRegistry<double>& reg, std::uint64_t seed);

Report check_channel_norm(const Shape& shape, std::uint64_t seed,
                          const Settings& settings = {});
Report check_depthwise_conv(const Shape& shape, int kernel_size,
                            std::uint64_t seed, const Settings& settings = {});
Report check_conv2d(const Shape& shape, int kernel_size, int out_channels,
                    std::uint64_t seed, const Settings& settings = {});
/// Full SPN / cSPN layer: every parameter plus x (and z when conditional).
Report check_spn_layer(const Shape& shape, const SpnOptions& options,
                       std::uint64_t seed, const Settings& settings = {});

/// The complete suite used by `spn gradcheck` and the acceptance tests:
/// normalization, depth-wise convolution, and SPN/cSPN layers across kernel
/// sizes, mask variants, spectral normalization, and conditional paths.
std::vector<Report> run_suite(const Shape& shape, std::uint64_t seed,
                              const Settings& settings = {});

std::string format(const Report& report);

}  // namespace spn::gradcheck
