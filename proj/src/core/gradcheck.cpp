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

#include "spn/core/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spn/init.hpp"
#include "spn/models/spectral_norm.hpp"
#include "spn/ops.hpp"

namespace spn::gradcheck {
namespace {

Tensor<double> random_tensor(const Shape& s, Rng& rng, double stddev = 1.0) {
  Tensor<double> t(s);
  normal_init(t, rng, stddev);
  return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  a.check_same(b, "gradcheck dot");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

bool Report::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(),
                     [](const Entry& e) { return e.passed; });
}

double Report::worst() const {
  double w = 0;
  for (const Entry& e : entries) w = std::max(w, e.rel_error);
  return w;
}

Entry compare(const std::string& name, Tensor<double>& value,
              const Tensor<double>& analytic,
              const std::function<double()>& loss, const Settings& settings) {
  value.check_same(analytic, "gradcheck compare");
  Entry e;
  e.name = name;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double saved = value[i];
    value[i] = saved + settings.step;
    const double up = loss();
    value[i] = saved - settings.step;
    const double down = loss();
    value[i] = saved;
    const double numeric = (up - down) / (2 * settings.step);
    e.max_abs_error = std::max(e.max_abs_error, std::abs(numeric - analytic[i]));
    e.scale = std::max({e.scale, std::abs(numeric), std::abs(analytic[i])});
  }
  const double floor = settings.abs_floor / settings.tolerance;
  e.rel_error = e.max_abs_error / std::max(e.scale, floor);
  e.passed = std::isfinite(e.rel_error) && e.rel_error < settings.tolerance;
  return e;
}

void randomize(ParamRegistry<double>& reg, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& p : reg.params()) normal_init(p.param->value, rng, 0.5);
}

Report check_channel_norm(const Shape& shape, std::uint64_t seed,
                          const Settings& settings) {
  Timer timer;
  Rng rng(seed);
  Report r{"channelwise_normalize", {}, 0};
  ChannelNorm<double> norm(shape.c);
  Tensor<double> x = random_tensor(shape, rng, 2.0);
  Tensor<double> upstream = random_tensor(shape, rng);
  norm.forward(x, Mode::kTrain);
  Tensor<double> dx = norm.backward(upstream);
  auto loss = [&] { return dot(upstream, norm.forward(x, Mode::kTrain)); };
  r.entries.push_back(compare("x", x, dx, loss, settings));
  r.seconds = timer.seconds();
  return r;
}

Report check_depthwise_conv(const Shape& shape, int kernel_size,
                            std::uint64_t seed, const Settings& settings) {
  Timer timer;
  Rng rng(seed);
  Report r{"depthwise_conv2d(k=" + std::to_string(kernel_size) + ")", {}, 0};
  Tensor<double> x = random_tensor(shape, rng);
  Tensor<double> k = random_tensor(Shape{kernel_size, kernel_size, 1, shape.c}, rng);
  Tensor<double> upstream = random_tensor(shape, rng);
  Tensor<double> dk(k.shape());
  Tensor<double> dx = ops::depthwise_conv2d_backward(x, k, upstream, &dk);
  auto loss = [&] { return dot(upstream, ops::depthwise_conv2d(x, k)); };
  r.entries.push_back(compare("x", x, dx, loss, settings));
  r.entries.push_back(compare("kernels", k, dk, loss, settings));
  r.seconds = timer.seconds();
  return r;
}

Report check_conv2d(const Shape& shape, int kernel_size, int out_channels,
                    std::uint64_t seed, const Settings& settings) {
  Timer timer;
  Rng rng(seed);
  Report r{"conv2d(k=" + std::to_string(kernel_size) + ")", {}, 0};
  Tensor<double> x = random_tensor(shape, rng);
  Tensor<double> w = random_tensor(
      Shape{kernel_size, kernel_size, shape.c, out_channels}, rng);
  Tensor<double> b = random_tensor(vector_shape(out_channels), rng);
  Tensor<double> upstream =
      random_tensor(Shape{shape.n, shape.h, shape.w, out_channels}, rng);
  Tensor<double> dw(w.shape()), db(b.shape());
  Tensor<double> dx = ops::conv2d_backward(x, w, upstream, &dw, &db);
  auto loss = [&] { return dot(upstream, ops::conv2d(x, w, &b)); };
  r.entries.push_back(compare("x", x, dx, loss, settings));
  r.entries.push_back(compare("weight", w, dw, loss, settings));
  r.entries.push_back(compare("bias", b, db, loss, settings));
  r.seconds = timer.seconds();
  return r;
}

Report check_spn_layer(const Shape& shape, const SpnOptions& options,
                       std::uint64_t seed, const Settings& settings) {
  Timer timer;
  Rng rng(seed);
  std::ostringstream label;
  label << (options.conditional ? "cspn" : "spn") << "(k=" << options.kernel_size
        << (options.mask_channels == MaskChannels::kSingle ? ",single-mask" : "")
        << (options.affine_conv == AffineConv::kStandard ? ",standard-conv" : "")
        << (options.spectral_norm ? ",sn" : "");
  if (options.conditional) {
    label << (options.latent_bias ? ",latent-bias" : ",no-latent-bias")
          << (options.per_class_kernels ? ",per-class-kernels" : "");
  }
  label << ")";
  Report r{label.str(), {}, 0};

  FreezePowerIteration freeze;
  SpnLayer<double> layer(shape.c, options, seed);
  ParamRegistry<double> reg;
  layer.collect(reg, "");
  randomize(reg, seed + 1);

  Tensor<double> x = random_tensor(shape, rng, 1.5);
  std::vector<int> classes;
  Tensor<double> z;
  Condition<double> cond;
  if (options.conditional) {
    std::uniform_int_distribution<int> pick(0, options.num_classes - 1);
    for (int b = 0; b < shape.n; ++b) classes.push_back(pick(rng));
    cond.classes = classes;
    if (options.latent_bias) {
      z = random_tensor(Shape{shape.n, 1, 1, options.z_dim}, rng);
      cond.z = &z;
    }
  }
  Tensor<double> upstream = random_tensor(shape, rng);

  layer.forward(x, cond, Mode::kTrain);
  reg.zero_grad();
  const Tensor<double> dx = layer.backward(upstream);
  const Tensor<double> dz = layer.latent_grad();
  std::vector<std::pair<std::string, Tensor<double>>> analytic;
  for (const auto& p : reg.params()) analytic.emplace_back(p.name, p.param->grad);

  auto loss = [&] { return dot(upstream, layer.forward(x, cond, Mode::kTrain)); };
  for (std::size_t i = 0; i < reg.params().size(); ++i) {
    r.entries.push_back(compare(analytic[i].first, reg.params()[i].param->value,
                                analytic[i].second, loss, settings));
  }
  r.entries.push_back(compare("x", x, dx, loss, settings));
  if (cond.z) r.entries.push_back(compare("z", z, dz, loss, settings));
  r.seconds = timer.seconds();
  return r;
}

std::vector<Report> run_suite(const Shape& shape, std::uint64_t seed,
                              const Settings& settings) {
  std::vector<Report> out;
  out.push_back(check_channel_norm(shape, seed, settings));
  out.push_back(check_depthwise_conv(shape, 3, seed + 1, settings));
  out.push_back(check_conv2d(shape, 3, shape.c + 1, seed + 2, settings));

  SpnOptions base;
  for (int k : {1, 3, 5}) {
    SpnOptions o = base;
    o.kernel_size = k;
    out.push_back(check_spn_layer(shape, o, seed + 10 + k, settings));
  }
  {
    SpnOptions o = base;
    o.mask_channels = MaskChannels::kSingle;
    out.push_back(check_spn_layer(shape, o, seed + 20, settings));
  }
  {
    SpnOptions o = base;
    o.affine_conv = AffineConv::kStandard;
    out.push_back(check_spn_layer(shape, o, seed + 21, settings));
  }
  {
    SpnOptions o = base;
    o.spectral_norm = true;
    out.push_back(check_spn_layer(shape, o, seed + 22, settings));
  }
  SpnOptions cond = base;
  cond.conditional = true;
  cond.num_classes = 3;
  cond.embed_dim = 4;
  cond.z_dim = 3;
  out.push_back(check_spn_layer(shape, cond, seed + 30, settings));
  {
    SpnOptions o = cond;
    o.latent_bias = false;
    out.push_back(check_spn_layer(shape, o, seed + 31, settings));
  }
  {
    SpnOptions o = cond;
    o.per_class_kernels = true;
    out.push_back(check_spn_layer(shape, o, seed + 32, settings));
  }
  return out;
}

std::string format(const Report& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-4s %-52s worst rel err %.3e  (%zu tensors, %.2fs)",
                report.passed() ? "PASS" : "FAIL", report.op.c_str(),
                report.worst(), report.entries.size(), report.seconds);
  std::string out = buf;
  for (const Entry& e : report.entries) {
    if (e.passed) continue;
    std::snprintf(buf, sizeof(buf), "\n       %-30s rel %.3e abs %.3e scale %.3e",
                  e.name.c_str(), e.rel_error, e.max_abs_error, e.scale);
    out += buf;
  }
  return out;
}

}  // namespace spn::gradcheck
