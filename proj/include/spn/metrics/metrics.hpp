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

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spn/data/dataset.hpp"
#include "spn/models/networks.hpp"
#include "spn/tensor.hpp"

namespace spn {

/// Sample mean and unbiased covariance of a feature set.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::int64_t count = 0;
};

/// features is N x F. A single row gives a zero covariance.
GaussianSummary summarize_features(const Eigen::MatrixXd& features);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
///
/// The trace of the square root is taken from the eigenvalues of the
/// symmetric product sqrt(S_a) S_b sqrt(S_a). Eigenvalues in (-tol, 0) are
/// clamped to 0; anything more negative throws std::domain_error naming it.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b,
                        double tol = 1e-6);

struct InceptionScore {
  double mean = 0;
  double std = 0;
};

/// probs is N x K with rows on the simplex (1e-6). Each of `splits`
/// contiguous chunks scores exp(mean_i KL(p_i || p_bar)).
InceptionScore inception_score(const Eigen::MatrixXd& probs, int splits = 10);

/// Image -> (features, class probabilities).
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// Square input side; callers resize to it.
  virtual int input_size() const = 0;
  virtual int feature_dim() const = 0;
  virtual int num_classes() const = 0;
  /// images is (B, S, S, 3) in [-1, 1]; fills B-row matrices.
  virtual void extract(const Tensor<float>& images, Eigen::MatrixXd& features,
                       Eigen::MatrixXd& probs) const = 0;
};

/// Fixed random network: 4x4 average pooling, a tanh projection to the
/// feature space and a softmax head. Only useful for comparisons made with
/// the same extractor.
class ToyExtractor final : public FeatureExtractor {
 public:
  explicit ToyExtractor(int input_size = 32, int feature_dim = 64,
                        int num_classes = 10, std::uint64_t seed = 0);

  int input_size() const override { return size_; }
  int feature_dim() const override { return static_cast<int>(w1_.rows()); }
  int num_classes() const override { return static_cast<int>(w2_.rows()); }
  void extract(const Tensor<float>& images, Eigen::MatrixXd& features,
               Eigen::MatrixXd& probs) const override;

  void save(const std::filesystem::path& path) const;
  static ToyExtractor load(const std::filesystem::path& path);

 private:
  int size_;
  Eigen::MatrixXd w1_;  // F x (S/4 * S/4 * 3)
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;  // K x F
};

/// "toy" (optionally "toy:<size>") builds the default toy extractor; any
/// other string is a path to a saved extractor file.
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& spec);

struct EvalResult {
  double fid = 0;
  double is_mean = 0;
  double is_std = 0;
  int samples = 0;
  int real_samples = 0;
};

/// Draws n_samples generator images (eval mode, latents and classes from
/// `seed`) and min(n_samples, |real|) real images from a seeded permutation,
/// quantizes both to 8 bits, resizes to the extractor input and compares.
EvalResult evaluate_model(Generator<float>& gen, int num_classes,
                          const FeatureExtractor& extractor, const Dataset& real,
                          int n_samples, std::uint64_t seed, int batch = 100);

/// Mask and inverse mask of the chosen SPN layer for a batch of latents.
struct MaskVisualization {
  Tensor<float> mask;     // (B, H, W, channels.size())
  Tensor<float> inverse;  // 1 - mask
  /// Per sample one row of m tiles and one row of m* tiles, one column per
  /// channel, grayscale.
  Image grid;
};

/// `layer` indexes gen.spn_layers() (negative counts from the end). Eval
/// mode needs populated running statistics; untrained nets use kTrain.
MaskVisualization visualize_masks(Generator<float>& gen, const Tensor<float>& z,
                                  std::span<const int> classes, int layer,
                                  const std::vector<int>& channels,
                                  Mode mode = Mode::kEval);

/// Mean over samples and channels of the spatial variance of a mask.
double mask_spatial_variance(const Tensor<float>& mask);

}  // namespace spn
