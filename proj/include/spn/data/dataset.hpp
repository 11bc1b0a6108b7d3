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
#include <filesystem>
#include <string>
#include <vector>

#include "spn/data/image_io.hpp"
#include "spn/init.hpp"
#include "spn/tensor.hpp"

namespace spn {

/// In-memory labelled image set, (N, H, W, 3) unsigned 8-bit.
struct Dataset {
  int size = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
  /// Empty for unlabelled data.
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> class_names;

  std::size_t image_bytes() const { return static_cast<std::size_t>(height) * width * 3; }
  const std::uint8_t* image(int i) const { return pixels.data() + i * image_bytes(); }
  Image image_copy(int i) const;
  /// Throws DataError when labels or extents are inconsistent.
  void validate() const;
};

enum class CifarVariant { k10 = 10, k100 = 100 };

/// Parses CIFAR binary record files (label byte(s) then 3072 channel-planar
/// pixel bytes). CIFAR-100 keeps the fine label.
Dataset load_cifar_files(const std::vector<std::filesystem::path>& files,
                         CifarVariant variant);
/// Standard file names under `dir`: data_batch_{1..5}.bin / test_batch.bin
/// for CIFAR-10, train.bin / test.bin for CIFAR-100.
Dataset load_cifar(const std::filesystem::path& dir, CifarVariant variant,
                   bool train = true);

/// One class per subdirectory (sorted by name); every image is resized to
/// size x size. Unreadable files are skipped with a warning on stderr.
Dataset load_image_folder(const std::filesystem::path& dir, int size = 128);

/// Bilinear resampling with pixel centres at half-integer coordinates
/// (src = (dst + 0.5) * in / out - 0.5, clamped at the border), rounded to
/// the nearest level.
Image resize_bilinear(const Image& src, int out_h, int out_w);

/// Synthetic single-object scenes: a filled circle, square or triangle
/// (label 0, 1, 2) of random colour, scale and position on a striped, noisy
/// background.
Dataset make_shapes_dataset(int n, int size, std::uint64_t seed);

/// x / 127.5 - 1.
float to_model_range(std::uint8_t v);
/// Inverse of to_model_range, clamped and rounded to the nearest level.
std::uint8_t from_model_range(float v);
/// Images idx[0..] as a (B, H, W, 3) tensor in [-1, 1].
Tensor<float> images_to_tensor(const Dataset& ds, const std::vector<int>& idx,
                               bool flip = false);
/// (B, H, W, 3) tensor in [-1, 1] to images.
std::vector<Image> tensor_to_images(const Tensor<float>& t);
/// Tiles images row-major into a cols-wide sheet with a 1-pixel gap.
Image make_grid(const std::vector<Image>& images, int cols);

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;   // empty for unlabelled datasets
  std::vector<int> indices;  // dataset rows
};

/// Infinite stream of mini-batches. Each epoch walks a fresh permutation that
/// is a pure function of (seed, epoch), so the cursor alone is enough to
/// resume a stream.
class BatchIterator {
 public:
  struct State {
    std::int64_t epoch = 0;
    std::int64_t cursor = 0;
  };

  BatchIterator(const Dataset& ds, int batch, std::uint64_t seed,
                bool drop_last = true, bool flip = false);

  Batch next();
  /// Indices of the next batch without advancing.
  std::vector<int> peek_indices() const;

  State state() const { return state_; }
  void restore(State s);
  std::int64_t batches_per_epoch() const;
  std::vector<int> permutation(std::int64_t epoch) const;

 private:
  void advance_epoch();

  const Dataset* ds_;
  int batch_;
  std::uint64_t seed_;
  bool drop_last_;
  bool flip_;
  State state_;
  std::vector<int> perm_;
};

}  // namespace spn
