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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spn/core/normalization.hpp"
#include "spn/core/spn_layer.hpp"
#include "spn/flops.hpp"
#include "spn/models/layers.hpp"
#include "spn/param.hpp"
#include "spn/tensor.hpp"

namespace spn {

enum class NormKind {
  kBatch,             // BN
  kConditional,       // cBN
  kConditionalLatent, // ccBN: cBN plus a linear map of z on scale and shift
  kSpn,               // SPN
  kConditionalSpn,    // cSPN
};

std::string to_string(NormKind kind);
/// Accepts bn, cbn, ccbn, spn, cspn (case-insensitive).
NormKind parse_norm_kind(const std::string& text);
bool is_conditional(NormKind kind);
bool is_spn(NormKind kind);

/// Everything needed to build one normalization site.
struct NormSpec {
  NormKind kind = NormKind::kBatch;
  int num_classes = 0;
  int z_dim = 0;
  /// SPN knobs (kernel size, mask channels, affine conv, biases, embedding
  /// size, latent bias, per-class kernels, spectral norm). The conditional,
  /// num_classes and z_dim fields are filled in from this spec.
  SpnOptions spn;
};

template <typename T>
std::unique_ptr<NormLayer<T>> make_norm(int channels, const NormSpec& spec,
                                        std::uint64_t seed);

// ---------------------------------------------------------------------------

struct GenBlockSpec {
  int in = 0;
  int out = 0;
  NormSpec norm;
  bool spectral = false;
  bool attention = false;
};

/// norm -> ReLU -> upsample -> conv3 -> norm -> ReLU -> conv3 [-> attention]
/// plus upsample [-> conv1] on the shortcut.
template <typename T>
class GenBlock {
 public:
  /// `rng` drives weight initialization; null leaves weights unset.
  GenBlock(const GenBlockSpec& spec, Rng* rng);

  Tensor<T> forward(const Tensor<T>& x, const Condition<T>& cond, Mode mode);
  /// Returns dL/dx; adds latent gradients into *dz when it is non-null.
  Tensor<T> backward(const Tensor<T>& dy, Tensor<T>* dz);
  void collect(ParamRegistry<T>& reg, const std::string& prefix);
  Shape trace(const Shape& in, FlopCounter& flops) const;

  const GenBlockSpec& spec() const { return spec_; }
  NormLayer<T>& norm1() { return *norm1_; }
  NormLayer<T>& norm2() { return *norm2_; }
  Conv2d<T>& conv1() { return conv1_; }
  Conv2d<T>& conv2() { return conv2_; }
  bool has_shortcut_conv() const { return spec_.in != spec_.out; }
  Conv2d<T>& shortcut() { return shortcut_; }
  SpatialAttention<T>* attention() { return attention_.get(); }

 private:
  GenBlockSpec spec_;
  std::unique_ptr<NormLayer<T>> norm1_;
  std::unique_ptr<NormLayer<T>> norm2_;
  Conv2d<T> conv1_;
  Conv2d<T> conv2_;
  Conv2d<T> shortcut_;
  std::unique_ptr<SpatialAttention<T>> attention_;
  Tensor<T> h1_;  // norm1 output (ReLU input)
  Tensor<T> h2_;  // norm2 output
};

struct DisBlockSpec {
  int in = 0;
  int out = 0;
  bool down = false;
  /// Conv-first block for raw images: no leading ReLU, shortcut pools first.
  bool optimized = false;
  bool spectral = true;
};

template <typename T>
class DisBlock {
 public:
  DisBlock(const DisBlockSpec& spec, Rng* rng);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& dy);
  void collect(ParamRegistry<T>& reg, const std::string& prefix);
  Shape trace(const Shape& in, FlopCounter& flops) const;

  const DisBlockSpec& spec() const { return spec_; }
  bool has_shortcut_conv() const { return spec_.down || spec_.in != spec_.out; }

 private:
  DisBlockSpec spec_;
  Conv2d<T> conv1_;
  Conv2d<T> conv2_;
  Conv2d<T> shortcut_;
  Tensor<T> x_;
  Tensor<T> c1_;
};

// ---------------------------------------------------------------------------

struct GeneratorSpec {
  int resolution = 32;
  int z_dim = 128;
  int bottom = 4;
  /// widths[0] is the FC output depth; block i maps widths[i] -> widths[i+1].
  std::vector<int> widths{256, 256, 256, 256};
  /// Blocks marked here take the model's norm kind when it is SPN or cSPN;
  /// the others keep BN (resp. cBN / ccBN).
  std::vector<bool> starred{true, true, true};
  NormKind norm = NormKind::kBatch;
  int num_classes = 0;
  bool spectral = false;
  /// Spatial attention after the second conv of every starred block.
  bool attention = false;
  SpnOptions spn;
  std::uint64_t seed = 0;
  /// Random initialization; off for pure parameter/FLOP accounting.
  bool init_weights = true;

  static GeneratorSpec gen32(NormKind norm, int num_classes = 0);
  static GeneratorSpec gen128(NormKind norm, int num_classes = 0);
  /// Same layout with every width replaced by `width`.
  GeneratorSpec with_width(int width) const;

  int num_blocks() const { return static_cast<int>(widths.size()) - 1; }
  /// Norm spec used at the sites of block `i`.
  NormSpec block_norm(int i) const;
  /// Throws std::invalid_argument listing every problem.
  void validate() const;
};

struct DiscriminatorSpec {
  int resolution = 32;
  std::vector<int> widths{128, 128, 128, 128};
  std::vector<bool> down{true, true, false, false};
  /// Projection head when > 0.
  int num_classes = 0;
  bool spectral = true;
  std::uint64_t seed = 1;
  bool init_weights = true;

  static DiscriminatorSpec dis32(int num_classes = 0);
  static DiscriminatorSpec dis128(int num_classes = 0);
  DiscriminatorSpec with_width(int width) const;

  void validate() const;
};

template <typename T>
class Generator {
 public:
  explicit Generator(const GeneratorSpec& spec);

  /// z is (B, 1, 1, z_dim); classes has B entries for conditional models.
  Tensor<T> forward(const Tensor<T>& z, std::span<const int> classes, Mode mode);
  /// Returns dL/dz.
  Tensor<T> backward(const Tensor<T>& dimage);
  void collect(ParamRegistry<T>& reg, const std::string& prefix = "gen");
  Shape trace(int batch, FlopCounter& flops) const;

  const GeneratorSpec& spec() const { return spec_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  GenBlock<T>& block(int i) { return *blocks_[i]; }
  /// SPN/cSPN layers in forward order.
  std::vector<SpnLayer<T>*> spn_layers();
  BatchNorm<T>& final_norm() { return final_norm_; }

 private:
  GeneratorSpec spec_;
  Dense<T> fc_;
  std::vector<std::unique_ptr<GenBlock<T>>> blocks_;
  BatchNorm<T> final_norm_;
  Conv2d<T> out_conv_;
  Tensor<T> z_;
  Tensor<T> hf_;   // final norm output
  Tensor<T> img_;  // tanh output
};

/// dense(h) + <embed(y), h>. h is (B,1,1,F), embedding is (1,1,K,F).
template <typename T>
Tensor<T> projection_logit(const Tensor<T>& h, std::span<const int> classes,
                           const Tensor<T>& dense_weight,
                           const Tensor<T>& dense_bias,
                           const Tensor<T>* embedding);

template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorSpec& spec);

  /// Returns logits of shape (B, 1, 1, 1).
  Tensor<T> forward(const Tensor<T>& image, std::span<const int> classes,
                    Mode mode);
  /// Returns dL/dimage.
  Tensor<T> backward(const Tensor<T>& dlogits);
  void collect(ParamRegistry<T>& reg, const std::string& prefix = "dis");
  Shape trace(int batch, FlopCounter& flops) const;

  const DiscriminatorSpec& spec() const { return spec_; }
  Dense<T>& head() { return head_; }
  Param<T>& embedding() { return embedding_; }

 private:
  DiscriminatorSpec spec_;
  std::vector<std::unique_ptr<DisBlock<T>>> blocks_;
  Dense<T> head_;
  Param<T> embedding_;  // (1, 1, K, F)
  Tensor<T> pre_relu_;
  Tensor<T> pooled_;
  std::vector<int> classes_;
};

// ---------------------------------------------------------------------------

std::int64_t count_parameters(const GeneratorSpec& spec);
std::int64_t count_parameters(const DiscriminatorSpec& spec);
std::int64_t count_flops(const GeneratorSpec& spec, FlopConvention convention,
                         int batch = 1);
std::int64_t count_flops(const DiscriminatorSpec& spec,
                         FlopConvention convention, int batch = 1);

struct AuditRow {
  std::string name;
  std::int64_t params = 0;
  std::int64_t flops_mac2 = 0;
  std::int64_t flops_mac1 = 0;
};

/// Parameter and FLOP counts for the BN and SPN versions of a generator
/// layout (norm fields of `base` are overridden).
struct Audit {
  AuditRow bn;
  AuditRow spn;
  std::int64_t delta_params() const { return spn.params - bn.params; }
  std::int64_t delta_mac2() const { return spn.flops_mac2 - bn.flops_mac2; }
  std::int64_t delta_mac1() const { return spn.flops_mac1 - bn.flops_mac1; }
};

Audit audit_generator(const GeneratorSpec& base);
/// Human-readable table.
std::string format_audit(const Audit& audit);
/// key=value lines.
std::string audit_key_values(const Audit& audit);
/// Per-layer parameter table of a generator (name, shape, count).
std::string layer_table(const GeneratorSpec& spec);

}  // namespace spn
