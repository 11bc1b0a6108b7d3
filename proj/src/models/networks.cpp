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

#include "spn/models/networks.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "spn/ops.hpp"

namespace spn {

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::kBatch: return "bn";
    case NormKind::kConditional: return "cbn";
    case NormKind::kConditionalLatent: return "ccbn";
    case NormKind::kSpn: return "spn";
    case NormKind::kConditionalSpn: return "cspn";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (t == "bn") return NormKind::kBatch;
  if (t == "cbn") return NormKind::kConditional;
  if (t == "ccbn") return NormKind::kConditionalLatent;
  if (t == "spn") return NormKind::kSpn;
  if (t == "cspn") return NormKind::kConditionalSpn;
  throw std::invalid_argument("unknown norm kind '" + text +
                              "' (expected bn, cbn, ccbn, spn, cspn)");
}

bool is_conditional(NormKind kind) {
  return kind == NormKind::kConditional ||
         kind == NormKind::kConditionalLatent ||
         kind == NormKind::kConditionalSpn;
}

bool is_spn(NormKind kind) {
  return kind == NormKind::kSpn || kind == NormKind::kConditionalSpn;
}

template <typename T>
std::unique_ptr<NormLayer<T>> make_norm(int channels, const NormSpec& spec,
                                        std::uint64_t seed) {
  switch (spec.kind) {
    case NormKind::kBatch:
      return std::make_unique<BatchNorm<T>>(channels);
    case NormKind::kConditional:
      return std::make_unique<ConditionalBatchNorm<T>>(channels, spec.num_classes,
                                                       0, false);
    case NormKind::kConditionalLatent:
      return std::make_unique<ConditionalBatchNorm<T>>(channels, spec.num_classes,
                                                       spec.z_dim, true);
    case NormKind::kSpn: {
      SpnOptions o = spec.spn;
      o.conditional = false;
      o.per_class_kernels = false;
      return std::make_unique<SpnLayer<T>>(channels, o, seed);
    }
    case NormKind::kConditionalSpn: {
      SpnOptions o = spec.spn;
      o.conditional = true;
      o.num_classes = spec.num_classes;
      o.z_dim = o.latent_bias ? spec.z_dim : 0;
      return std::make_unique<SpnLayer<T>>(channels, o, seed);
    }
  }
  throw std::invalid_argument("unknown norm kind");
}

// ---------------------------------------------------------------------------

template <typename T>
GenBlock<T>::GenBlock(const GenBlockSpec& spec, Rng* rng)
    : spec_(spec),
      conv1_(spec.in, spec.out, 3, true, spec.spectral),
      conv2_(spec.out, spec.out, 3, true, spec.spectral) {
  const std::uint64_t s1 = rng ? (*rng)() : 0;
  const std::uint64_t s2 = rng ? (*rng)() : 1;
  norm1_ = make_norm<T>(spec.in, spec.norm, s1);
  norm2_ = make_norm<T>(spec.out, spec.norm, s2);
  if (has_shortcut_conv()) {
    shortcut_ = Conv2d<T>(spec.in, spec.out, 1, true, spec.spectral);
  }
  if (spec.attention) {
    attention_ = std::make_unique<SpatialAttention<T>>(spec.spectral);
  }
  if (rng) {
    conv1_.init(*rng);
    conv2_.init(*rng);
    if (has_shortcut_conv()) shortcut_.init(*rng);
    if (attention_) attention_->init(*rng);
  }
}

template <typename T>
Tensor<T> GenBlock<T>::forward(const Tensor<T>& x, const Condition<T>& cond,
                               Mode mode) {
  h1_ = norm1_->forward(x, cond, mode);
  Tensor<T> h = conv1_.forward(ops::upsample_nearest2x(ops::relu(h1_)), mode);
  h2_ = norm2_->forward(h, cond, mode);
  h = conv2_.forward(ops::relu(h2_), mode);
  if (attention_) h = attention_->forward(h, mode);
  Tensor<T> sc = ops::upsample_nearest2x(x);
  if (has_shortcut_conv()) sc = shortcut_.forward(sc, mode);
  h += sc;
  return h;
}

template <typename T>
Tensor<T> GenBlock<T>::backward(const Tensor<T>& dy, Tensor<T>* dz) {
  auto add_latent = [&](NormLayer<T>& n) {
    const Tensor<T>& g = n.latent_grad();
    if (dz && !g.empty()) *dz += g;
  };
  Tensor<T> d = dy;
  if (attention_) d = attention_->backward(d);
  d = conv2_.backward(d);
  d = norm2_->backward(ops::relu_backward(h2_, d));
  add_latent(*norm2_);
  d = ops::upsample_nearest2x_backward(conv1_.backward(d));
  Tensor<T> dx = norm1_->backward(ops::relu_backward(h1_, d));
  add_latent(*norm1_);
  Tensor<T> ds = dy;
  if (has_shortcut_conv()) ds = shortcut_.backward(ds);
  dx += ops::upsample_nearest2x_backward(ds);
  return dx;
}

template <typename T>
void GenBlock<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  norm1_->collect(reg, join_name(prefix, "norm1"));
  conv1_.collect(reg, join_name(prefix, "conv1"));
  norm2_->collect(reg, join_name(prefix, "norm2"));
  conv2_.collect(reg, join_name(prefix, "conv2"));
  if (attention_) attention_->collect(reg, join_name(prefix, "attention"));
  if (has_shortcut_conv()) shortcut_.collect(reg, join_name(prefix, "shortcut"));
}

template <typename T>
Shape GenBlock<T>::trace(const Shape& in, FlopCounter& flops) const {
  norm1_->trace(in, flops);
  const Shape up{in.n, in.h * 2, in.w * 2, in.c};
  Shape h = conv1_.trace(up, flops);
  norm2_->trace(h, flops);
  h = conv2_.trace(h, flops);
  if (attention_) attention_->trace(h, flops);
  if (has_shortcut_conv()) shortcut_.trace(up, flops);
  flops.ops(static_cast<std::int64_t>(h.size()));  // residual sum
  return h;
}

// ---------------------------------------------------------------------------

template <typename T>
DisBlock<T>::DisBlock(const DisBlockSpec& spec, Rng* rng)
    : spec_(spec),
      conv1_(spec.in, spec.out, 3, true, spec.spectral),
      conv2_(spec.out, spec.out, 3, true, spec.spectral) {
  if (spec.optimized && !spec.down) {
    throw std::invalid_argument("the conv-first discriminator block must downsample");
  }
  if (has_shortcut_conv()) {
    shortcut_ = Conv2d<T>(spec.in, spec.out, 1, true, spec.spectral);
  }
  if (rng) {
    conv1_.init(*rng);
    conv2_.init(*rng);
    if (has_shortcut_conv()) shortcut_.init(*rng);
  }
}

template <typename T>
Tensor<T> DisBlock<T>::forward(const Tensor<T>& x, Mode mode) {
  x_ = x;
  c1_ = conv1_.forward(spec_.optimized ? x : ops::relu(x), mode);
  Tensor<T> h = conv2_.forward(ops::relu(c1_), mode);
  if (spec_.down) h = ops::avg_pool2x2(h);
  Tensor<T> sc;
  if (spec_.optimized) {
    sc = shortcut_.forward(ops::avg_pool2x2(x), mode);
  } else if (has_shortcut_conv()) {
    sc = shortcut_.forward(x, mode);
    if (spec_.down) sc = ops::avg_pool2x2(sc);
  } else {
    sc = x;
  }
  h += sc;
  return h;
}

template <typename T>
Tensor<T> DisBlock<T>::backward(const Tensor<T>& dy) {
  Tensor<T> d = spec_.down ? ops::avg_pool2x2_backward(dy) : dy;
  d = ops::relu_backward(c1_, conv2_.backward(d));
  Tensor<T> dx = conv1_.backward(d);
  if (!spec_.optimized) dx = ops::relu_backward(x_, dx);
  if (spec_.optimized) {
    dx += ops::avg_pool2x2_backward(shortcut_.backward(dy));
  } else if (has_shortcut_conv()) {
    dx += shortcut_.backward(spec_.down ? ops::avg_pool2x2_backward(dy) : dy);
  } else {
    dx += dy;
  }
  return dx;
}

template <typename T>
void DisBlock<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  conv1_.collect(reg, join_name(prefix, "conv1"));
  conv2_.collect(reg, join_name(prefix, "conv2"));
  if (has_shortcut_conv()) shortcut_.collect(reg, join_name(prefix, "shortcut"));
}

template <typename T>
Shape DisBlock<T>::trace(const Shape& in, FlopCounter& flops) const {
  Shape h = conv1_.trace(in, flops);
  h = conv2_.trace(h, flops);
  if (spec_.down) {
    flops.ops(static_cast<std::int64_t>(h.size()));
    h = Shape{h.n, h.h / 2, h.w / 2, h.c};
  }
  if (spec_.optimized) {
    flops.ops(static_cast<std::int64_t>(in.size()));
    shortcut_.trace(Shape{in.n, in.h / 2, in.w / 2, in.c}, flops);
  } else if (has_shortcut_conv()) {
    const Shape s = shortcut_.trace(in, flops);
    if (spec_.down) flops.ops(static_cast<std::int64_t>(s.size()));
  }
  flops.ops(static_cast<std::int64_t>(h.size()));  // residual sum
  return h;
}

// ---------------------------------------------------------------------------

GeneratorSpec GeneratorSpec::gen32(NormKind norm, int num_classes) {
  GeneratorSpec s;
  s.resolution = 32;
  s.widths = {256, 256, 256, 256};
  s.starred = {true, true, true};
  s.norm = norm;
  s.num_classes = num_classes;
  s.spectral = false;
  return s;
}

GeneratorSpec GeneratorSpec::gen128(NormKind norm, int num_classes) {
  GeneratorSpec s;
  s.resolution = 128;
  s.widths = {512, 512, 512, 256, 128, 64};
  s.starred = {false, false, true, true, true};
  s.norm = norm;
  s.num_classes = num_classes;
  s.spectral = true;
  return s;
}

GeneratorSpec GeneratorSpec::with_width(int width) const {
  GeneratorSpec s = *this;
  std::fill(s.widths.begin(), s.widths.end(), width);
  return s;
}

NormSpec GeneratorSpec::block_norm(int i) const {
  NormSpec n;
  n.num_classes = num_classes;
  n.z_dim = z_dim;
  n.spn = spn;
  n.spn.spectral_norm = spectral;
  const bool star = i >= 0 && i < static_cast<int>(starred.size()) && starred[i];
  switch (norm) {
    case NormKind::kSpn:
      n.kind = star ? NormKind::kSpn : NormKind::kBatch;
      break;
    case NormKind::kConditionalSpn:
      n.kind = star ? NormKind::kConditionalSpn
                    : (spn.latent_bias ? NormKind::kConditionalLatent
                                       : NormKind::kConditional);
      break;
    default:
      n.kind = norm;
  }
  return n;
}

void GeneratorSpec::validate() const {
  std::vector<std::string> problems;
  if (widths.size() < 2) problems.push_back("generator needs at least one block");
  for (int w : widths) {
    if (w < 1) problems.push_back("generator widths must be positive");
  }
  if (static_cast<int>(starred.size()) != num_blocks()) {
    problems.push_back("generator has " + std::to_string(num_blocks()) +
                       " blocks but " + std::to_string(starred.size()) +
                       " star flags");
  }
  if (z_dim < 1) problems.push_back("z_dim must be >= 1");
  if (bottom < 1) problems.push_back("bottom resolution must be >= 1");
  if (num_blocks() >= 1 && bottom * (1 << num_blocks()) != resolution) {
    problems.push_back("resolution " + std::to_string(resolution) +
                       " is not bottom * 2^blocks = " +
                       std::to_string(bottom * (1 << num_blocks())));
  }
  if (is_conditional(norm) && num_classes < 1) {
    problems.push_back("conditional norm '" + to_string(norm) +
                       "' needs num_classes >= 1");
  }
  if (is_spn(norm)) {
    SpnOptions o = spn;
    o.conditional = norm == NormKind::kConditionalSpn;
    o.num_classes = num_classes;
    o.z_dim = z_dim;
    if (!o.conditional) o.per_class_kernels = false;
    try {
      o.validate(1);
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid generator spec:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
  }
}

DiscriminatorSpec DiscriminatorSpec::dis32(int num_classes) {
  DiscriminatorSpec s;
  s.resolution = 32;
  s.widths = {128, 128, 128, 128};
  s.down = {true, true, false, false};
  s.num_classes = num_classes;
  return s;
}

DiscriminatorSpec DiscriminatorSpec::dis128(int num_classes) {
  DiscriminatorSpec s;
  s.resolution = 128;
  s.widths = {64, 128, 256, 512, 512, 512};
  s.down = {true, true, true, true, true, false};
  s.num_classes = num_classes;
  return s;
}

DiscriminatorSpec DiscriminatorSpec::with_width(int width) const {
  DiscriminatorSpec s = *this;
  std::fill(s.widths.begin(), s.widths.end(), width);
  return s;
}

void DiscriminatorSpec::validate() const {
  std::vector<std::string> problems;
  if (widths.empty()) problems.push_back("discriminator needs at least one block");
  if (down.size() != widths.size()) {
    problems.push_back("discriminator has " + std::to_string(widths.size()) +
                       " blocks but " + std::to_string(down.size()) +
                       " down flags");
  }
  if (!down.empty() && !down[0]) {
    problems.push_back("the first discriminator block must downsample");
  }
  for (int w : widths) {
    if (w < 1) problems.push_back("discriminator widths must be positive");
  }
  int res = resolution;
  for (bool d : down) {
    if (!d) continue;
    if (res % 2 != 0) {
      problems.push_back("resolution " + std::to_string(resolution) +
                         " cannot be halved " +
                         std::to_string(std::count(down.begin(), down.end(), true)) +
                         " times");
      break;
    }
    res /= 2;
  }
  if (num_classes < 0) problems.push_back("num_classes must be >= 0");
  if (!problems.empty()) {
    std::string msg = "invalid discriminator spec:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw std::invalid_argument(msg);
  }
}

// ---------------------------------------------------------------------------

template <typename T>
Generator<T>::Generator(const GeneratorSpec& spec)
    : spec_(spec),
      final_norm_(spec.widths.empty() ? 1 : spec.widths.back()) {
  spec_.validate();
  Rng rng(spec_.seed);
  Rng* init = spec_.init_weights ? &rng : nullptr;
  const int b = spec_.bottom;
  fc_ = Dense<T>(spec_.z_dim, b * b * spec_.widths[0], true, spec_.spectral);
  if (init) fc_.init(rng);
  for (int i = 0; i < spec_.num_blocks(); ++i) {
    GenBlockSpec bs;
    bs.in = spec_.widths[i];
    bs.out = spec_.widths[i + 1];
    bs.norm = spec_.block_norm(i);
    bs.spectral = spec_.spectral;
    bs.attention = spec_.attention && spec_.starred[i];
    blocks_.push_back(std::make_unique<GenBlock<T>>(bs, init));
  }
  out_conv_ = Conv2d<T>(spec_.widths.back(), 3, 3, true, spec_.spectral);
  if (init) out_conv_.init(rng);
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& z, std::span<const int> classes,
                                Mode mode) {
  const int n = z.shape().n;
  if (!(z.shape() == Shape{n, 1, 1, spec_.z_dim})) {
    throw ShapeError("generator expects z of shape (B,1,1," +
                     std::to_string(spec_.z_dim) + "), got " + z.shape().str());
  }
  z_ = z;
  Condition<T> cond;
  if (is_conditional(spec_.norm)) {
    check_classes(classes, n, spec_.num_classes);
    cond.classes = classes;
    cond.z = &z_;
  }
  Tensor<T> h = fc_.forward(z, mode);
  h.reshape(Shape{n, spec_.bottom, spec_.bottom, spec_.widths[0]});
  for (auto& b : blocks_) h = b->forward(h, cond, mode);
  hf_ = final_norm_.forward(h, {}, mode);
  img_ = ops::tanh(out_conv_.forward(ops::relu(hf_), mode));
  return img_;
}

template <typename T>
Tensor<T> Generator<T>::backward(const Tensor<T>& dimage) {
  img_.check_same(dimage, "generator backward");
  Tensor<T> d(dimage.shape());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = dimage[i] * (T(1) - img_[i] * img_[i]);
  }
  d = out_conv_.backward(d);
  d = final_norm_.backward(ops::relu_backward(hf_, d));
  Tensor<T> dz(z_.shape());
  for (int i = num_blocks() - 1; i >= 0; --i) d = blocks_[i]->backward(d, &dz);
  d.reshape(Shape{z_.shape().n, 1, 1, static_cast<int>(d.size()) / z_.shape().n});
  dz += fc_.backward(d);
  return dz;
}

template <typename T>
void Generator<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  fc_.collect(reg, join_name(prefix, "fc"));
  for (int i = 0; i < num_blocks(); ++i) {
    blocks_[i]->collect(reg, join_name(prefix, "block" + std::to_string(i)));
  }
  final_norm_.collect(reg, join_name(prefix, "final_norm"));
  out_conv_.collect(reg, join_name(prefix, "out_conv"));
}

template <typename T>
Shape Generator<T>::trace(int batch, FlopCounter& flops) const {
  fc_.trace(Shape{batch, 1, 1, spec_.z_dim}, flops);
  Shape h{batch, spec_.bottom, spec_.bottom, spec_.widths[0]};
  for (const auto& b : blocks_) h = b->trace(h, flops);
  final_norm_.trace(h, flops);
  return out_conv_.trace(h, flops);
}

template <typename T>
std::vector<SpnLayer<T>*> Generator<T>::spn_layers() {
  std::vector<SpnLayer<T>*> out;
  for (auto& b : blocks_) {
    for (NormLayer<T>* n : {&b->norm1(), &b->norm2()}) {
      if (auto* s = dynamic_cast<SpnLayer<T>*>(n)) out.push_back(s);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> projection_logit(const Tensor<T>& h, std::span<const int> classes,
                           const Tensor<T>& dense_weight,
                           const Tensor<T>& dense_bias,
                           const Tensor<T>* embedding) {
  const Shape& s = h.shape();
  const int f = s.c;
  Tensor<T> out = ops::conv2d(h, dense_weight, &dense_bias);
  if (embedding == nullptr) return out;
  if (embedding->shape().c != f) {
    throw ShapeError("projection embedding " + embedding->shape().str() +
                     " does not match " + std::to_string(f) + " features");
  }
  check_classes(classes, s.n, embedding->shape().w);
  for (int b = 0; b < s.n; ++b) {
    const T* e = embedding->data() + static_cast<std::size_t>(classes[b]) * f;
    const T* p = h.data() + static_cast<std::size_t>(b) * f;
    T acc = 0;
    for (int j = 0; j < f; ++j) acc += e[j] * p[j];
    out[b] += acc;
  }
  return out;
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorSpec& spec) : spec_(spec) {
  spec_.validate();
  Rng rng(spec_.seed);
  Rng* init = spec_.init_weights ? &rng : nullptr;
  int in = 3;
  for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
    DisBlockSpec bs;
    bs.in = in;
    bs.out = spec_.widths[i];
    bs.down = spec_.down[i];
    bs.optimized = i == 0;
    bs.spectral = spec_.spectral;
    blocks_.push_back(std::make_unique<DisBlock<T>>(bs, init));
    in = bs.out;
  }
  head_ = Dense<T>(in, 1, true, spec_.spectral);
  if (init) head_.init(rng);
  if (spec_.num_classes > 0) {
    embedding_ = Param<T>(Shape{1, 1, spec_.num_classes, in});
    if (init) normal_init(embedding_.value, rng, T(0.02));
  }
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& image,
                                    std::span<const int> classes, Mode mode) {
  const Shape& s = image.shape();
  if (s.h != spec_.resolution || s.w != spec_.resolution || s.c != 3) {
    throw ShapeError("discriminator expects (B," + std::to_string(spec_.resolution) +
                     "," + std::to_string(spec_.resolution) + ",3) images, got " +
                     s.str());
  }
  Tensor<T> h = image;
  for (auto& b : blocks_) h = b->forward(h, mode);
  pre_relu_ = h;
  pooled_ = ops::global_sum_pool(ops::relu(h));
  Tensor<T> out = head_.forward(pooled_, mode);
  classes_.clear();
  if (spec_.num_classes > 0) {
    check_classes(classes, s.n, spec_.num_classes);
    classes_.assign(classes.begin(), classes.end());
    const Tensor<T> zero_bias(vector_shape(1));
    Tensor<T> zero_w(Shape{1, 1, pooled_.shape().c, 1});
    Tensor<T> proj = projection_logit(pooled_, classes, zero_w, zero_bias,
                                      &embedding_.value);
    out += proj;
  }
  return out;
}

template <typename T>
Tensor<T> Discriminator<T>::backward(const Tensor<T>& dlogits) {
  Tensor<T> dp = head_.backward(dlogits);
  if (spec_.num_classes > 0) {
    const int f = pooled_.shape().c;
    for (int b = 0; b < pooled_.shape().n; ++b) {
      const std::size_t row = static_cast<std::size_t>(classes_[b]) * f;
      const T g = dlogits[b];
      for (int j = 0; j < f; ++j) {
        dp[static_cast<std::size_t>(b) * f + j] += g * embedding_.value[row + j];
        embedding_.grad[row + j] += g * pooled_[static_cast<std::size_t>(b) * f + j];
      }
    }
  }
  Tensor<T> d = ops::relu_backward(
      pre_relu_, ops::global_sum_pool_backward(dp, pre_relu_.shape()));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = (*it)->backward(d);
  return d;
}

template <typename T>
void Discriminator<T>::collect(ParamRegistry<T>& reg, const std::string& prefix) {
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i]->collect(reg, join_name(prefix, "block" + std::to_string(i)));
  }
  head_.collect(reg, join_name(prefix, "head"));
  if (spec_.num_classes > 0) reg.add(join_name(prefix, "embedding"), embedding_);
}

template <typename T>
Shape Discriminator<T>::trace(int batch, FlopCounter& flops) const {
  Shape h{batch, spec_.resolution, spec_.resolution, 3};
  for (const auto& b : blocks_) h = b->trace(h, flops);
  flops.ops(static_cast<std::int64_t>(h.size()));  // global sum pooling
  const Shape pooled{batch, 1, 1, h.c};
  Shape out = head_.trace(pooled, flops);
  if (spec_.num_classes > 0) flops.macs(static_cast<std::int64_t>(batch) * h.c);
  return out;
}

// ---------------------------------------------------------------------------

std::int64_t count_parameters(const GeneratorSpec& spec) {
  GeneratorSpec s = spec;
  s.init_weights = false;
  Generator<float> g(s);
  ParamRegistry<float> reg;
  g.collect(reg);
  return reg.count();
}

std::int64_t count_parameters(const DiscriminatorSpec& spec) {
  DiscriminatorSpec s = spec;
  s.init_weights = false;
  Discriminator<float> d(s);
  ParamRegistry<float> reg;
  d.collect(reg);
  return reg.count();
}

std::int64_t count_flops(const GeneratorSpec& spec, FlopConvention convention,
                         int batch) {
  GeneratorSpec s = spec;
  s.init_weights = false;
  Generator<float> g(s);
  FlopCounter flops(convention);
  g.trace(batch, flops);
  return flops.total();
}

std::int64_t count_flops(const DiscriminatorSpec& spec,
                         FlopConvention convention, int batch) {
  DiscriminatorSpec s = spec;
  s.init_weights = false;
  Discriminator<float> d(s);
  FlopCounter flops(convention);
  d.trace(batch, flops);
  return flops.total();
}

namespace {

AuditRow audit_row(const GeneratorSpec& spec) {
  AuditRow r;
  r.name = to_string(spec.norm);
  r.params = count_parameters(spec);
  r.flops_mac2 = count_flops(spec, FlopConvention::kMac2);
  r.flops_mac1 = count_flops(spec, FlopConvention::kMac1);
  return r;
}

std::string millions(std::int64_t v, double unit, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%s", static_cast<double>(v) / unit, suffix);
  return buf;
}

}  // namespace

Audit audit_generator(const GeneratorSpec& base) {
  GeneratorSpec bn = base;
  GeneratorSpec sp = base;
  if (is_conditional(base.norm)) {
    bn.norm = base.spn.latent_bias ? NormKind::kConditionalLatent
                                   : NormKind::kConditional;
    sp.norm = NormKind::kConditionalSpn;
  } else {
    bn.norm = NormKind::kBatch;
    sp.norm = NormKind::kSpn;
  }
  return Audit{audit_row(bn), audit_row(sp)};
}

std::string format_audit(const Audit& a) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %14s %10s %16s %10s %16s %10s\n", "norm",
                "params", "", "flops(mac2)", "", "flops(mac1)", "");
  os << line;
  for (const AuditRow* r : {&a.bn, &a.spn}) {
    std::snprintf(line, sizeof(line), "%-8s %14lld %10s %16lld %10s %16lld %10s\n",
                  r->name.c_str(), static_cast<long long>(r->params),
                  millions(r->params, 1e6, "M").c_str(),
                  static_cast<long long>(r->flops_mac2),
                  millions(r->flops_mac2, 1e9, "B").c_str(),
                  static_cast<long long>(r->flops_mac1),
                  millions(r->flops_mac1, 1e9, "B").c_str());
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-8s %14lld %10s %16lld %10s %16lld %10s\n",
                "delta", static_cast<long long>(a.delta_params()),
                millions(a.delta_params(), 1e6, "M").c_str(),
                static_cast<long long>(a.delta_mac2()),
                millions(a.delta_mac2(), 1e9, "B").c_str(),
                static_cast<long long>(a.delta_mac1()),
                millions(a.delta_mac1(), 1e9, "B").c_str());
  os << line;
  os << "flops are per generated image; mac2 counts a multiply-add as 2, mac1 as 1\n";
  return os.str();
}

std::string audit_key_values(const Audit& a) {
  std::ostringstream os;
  for (const AuditRow* r : {&a.bn, &a.spn}) {
    const std::string k = r == &a.bn ? "baseline" : "spn";
    os << k << ".norm=" << r->name << "\n";
    os << k << ".params=" << r->params << "\n";
    os << k << ".flops_mac2=" << r->flops_mac2 << "\n";
    os << k << ".flops_mac1=" << r->flops_mac1 << "\n";
  }
  os << "delta.params=" << a.delta_params() << "\n";
  os << "delta.flops_mac2=" << a.delta_mac2() << "\n";
  os << "delta.flops_mac1=" << a.delta_mac1() << "\n";
  return os.str();
}

std::string layer_table(const GeneratorSpec& spec) {
  GeneratorSpec s = spec;
  s.init_weights = false;
  Generator<float> g(s);
  ParamRegistry<float> reg;
  g.collect(reg);
  std::ostringstream os;
  char line[200];
  for (const auto& e : reg.params()) {
    std::snprintf(line, sizeof(line), "%-44s %-20s %10zu\n", e.name.c_str(),
                  e.param->value.shape().str().c_str(), e.param->size());
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-44s %-20s %10lld\n", "total", "",
                static_cast<long long>(reg.count()));
  os << line;
  return os.str();
}

#define SPN_INSTANTIATE(T)                                                     \
  template std::unique_ptr<NormLayer<T>> make_norm<T>(int, const NormSpec&,    \
                                                      std::uint64_t);          \
  template class GenBlock<T>;                                                  \
  template class DisBlock<T>;                                                  \
  template class Generator<T>;                                                 \
  template class Discriminator<T>;                                             \
  template Tensor<T> projection_logit(const Tensor<T>&, std::span<const int>,  \
                                      const Tensor<T>&, const Tensor<T>&,      \
                                      const Tensor<T>*);

SPN_INSTANTIATE(float)
SPN_INSTANTIATE(double)

}  // namespace spn
