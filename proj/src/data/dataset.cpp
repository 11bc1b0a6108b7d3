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

#include "spn/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

namespace spn {
namespace {

namespace fs = std::filesystem;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Image Dataset::image_copy(int i) const {
  Image img(height, width);
  std::copy_n(image(i), image_bytes(), img.rgb.begin());
  return img;
}

void Dataset::validate() const {
  if (size < 1) throw DataError("dataset is empty");
  if (pixels.size() != static_cast<std::size_t>(size) * image_bytes()) {
    throw DataError("dataset pixel buffer does not match its extents");
  }
  if (!labels.empty()) {
    if (labels.size() != static_cast<std::size_t>(size)) {
      throw DataError("dataset has " + std::to_string(labels.size()) + " labels for " +
                      std::to_string(size) + " images");
    }
    for (int l : labels) {
      if (l < 0 || l >= num_classes) {
        throw DataError("label " + std::to_string(l) + " outside [0, " +
                        std::to_string(num_classes) + ")");
      }
    }
  }
}

// --- CIFAR -------------------------------------------------------------------

Dataset load_cifar_files(const std::vector<fs::path>& files, CifarVariant variant) {
  const std::size_t label_bytes = variant == CifarVariant::k10 ? 1 : 2;
  const std::size_t record = label_bytes + 3072;
  Dataset ds;
  ds.height = 32;
  ds.width = 32;
  ds.num_classes = static_cast<int>(variant);
  for (const auto& f : files) {
    const std::vector<std::uint8_t> bytes = read_bytes(f);
    if (bytes.empty() || bytes.size() % record != 0) {
      throw DataError("corrupt archive " + f.string() + ": expected a multiple of " +
                      std::to_string(record) + " bytes, got " + std::to_string(bytes.size()));
    }
    const std::size_t n = bytes.size() / record;
    const std::size_t base = ds.pixels.size();
    ds.pixels.resize(base + n * 3072);
    for (std::size_t r = 0; r < n; ++r) {
      const std::uint8_t* rec = bytes.data() + r * record;
      const int label = rec[label_bytes - 1];
      if (label >= ds.num_classes) {
        throw DataError("corrupt archive " + f.string() + ": label " +
                        std::to_string(label) + " in record " + std::to_string(r));
      }
      ds.labels.push_back(label);
      const std::uint8_t* planes = rec + label_bytes;
      std::uint8_t* out = ds.pixels.data() + base + r * 3072;
      for (int p = 0; p < 1024; ++p) {
        for (int c = 0; c < 3; ++c) out[p * 3 + c] = planes[c * 1024 + p];
      }
    }
    ds.size += static_cast<int>(n);
  }
  ds.validate();
  return ds;
}

Dataset load_cifar(const fs::path& dir, CifarVariant variant, bool train) {
  std::vector<fs::path> files;
  if (variant == CifarVariant::k10) {
    if (train) {
      for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
    } else {
      files.push_back(dir / "test_batch.bin");
    }
  } else {
    files.push_back(dir / (train ? "train.bin" : "test.bin"));
  }
  for (const auto& f : files) {
    if (!fs::exists(f)) throw DataError("missing CIFAR file " + f.string());
  }
  return load_cifar_files(files, variant);
}

// --- image folders -----------------------------------------------------------

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  if (src.height < 1 || src.width < 1 || out_h < 1 || out_w < 1) {
    throw DataError("resize: empty image");
  }
  Image dst(out_h, out_w);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(y0, x0, c) * (1 - wx) + src.at(y0, x1, c) * wx;
        const double bot = src.at(y1, x0, c) * (1 - wx) + src.at(y1, x1, c) * wx;
        dst.at(y, x, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(top * (1 - wy) + bot * wy), 0L, 255L));
      }
    }
  }
  return dst;
}

Dataset load_image_folder(const fs::path& dir, int size) {
  if (size < 1) throw DataError("image folder size must be positive");
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) classes.push_back(e.path());
  }
  std::sort(classes.begin(), classes.end());
  Dataset ds;
  ds.height = size;
  ds.width = size;
  ds.num_classes = static_cast<int>(classes.size());
  for (int c = 0; c < ds.num_classes; ++c) {
    ds.class_names.push_back(classes[c].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(classes[c])) {
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Image img;
      try {
        img = read_image(f);
      } catch (const DataError& err) {
        std::cerr << "warning: skipping " << f.string() << ": " << err.what() << "\n";
        continue;
      }
      if (img.height != size || img.width != size) img = resize_bilinear(img, size, size);
      ds.pixels.insert(ds.pixels.end(), img.rgb.begin(), img.rgb.end());
      ds.labels.push_back(c);
      ++ds.size;
    }
  }
  if (ds.size == 0) throw DataError("no readable images under " + dir.string());
  ds.validate();
  return ds;
}

// --- synthetic shapes --------------------------------------------------------

Dataset make_shapes_dataset(int n, int size, std::uint64_t seed) {
  if (n < 1 || size < 8) throw DataError("shapes dataset needs n >= 1 and size >= 8");
  Dataset ds;
  ds.size = n;
  ds.height = size;
  ds.width = size;
  ds.num_classes = 3;
  ds.class_names = {"circle", "square", "triangle"};
  ds.pixels.resize(static_cast<std::size_t>(n) * size * size * 3);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 8.0);
  for (int i = 0; i < n; ++i) {
    const int shape = static_cast<int>(rng() % 3);
    ds.labels.push_back(shape);
    // Dark background with light objects or the reverse, so the object
    // always stands out.
    const bool light_bg = u(rng) < 0.5;
    double bg[3], stripe[3], fg[3];
    for (int c = 0; c < 3; ++c) {
      bg[c] = light_bg ? 150 + 80 * u(rng) : 20 + 80 * u(rng);
      stripe[c] = bg[c] + (u(rng) - 0.5) * 60;
      fg[c] = light_bg ? 10 + 110 * u(rng) : 140 + 110 * u(rng);
    }
    const double angle = u(rng) * 3.14159265358979;
    const double freq = 2 + 4 * u(rng);
    const double r = size * (0.18 + 0.14 * u(rng));
    const double cy = r + (size - 2 * r) * u(rng);
    const double cx = r + (size - 2 * r) * u(rng);
    std::uint8_t* out = ds.pixels.data() + static_cast<std::size_t>(i) * size * size * 3;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double dy = y + 0.5 - cy;
        const double dx = x + 0.5 - cx;
        bool inside = false;
        switch (shape) {
          case 0: inside = dx * dx + dy * dy <= r * r; break;
          case 1: inside = std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r; break;
          default: inside = dy <= 0.8 * r && dy >= -r + 2 * std::abs(dx); break;
        }
        const double t = (x * std::cos(angle) + y * std::sin(angle)) * freq / size;
        const bool band = std::fmod(t, 1.0) < 0.5;
        for (int c = 0; c < 3; ++c) {
          const double v = inside ? fg[c] : (band ? stripe[c] : bg[c]) + noise(rng);
          out[(y * size + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
      }
    }
  }
  return ds;
}

// --- range mapping -----------------------------------------------------------

float to_model_range(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

std::uint8_t from_model_range(float v) {
  const long q = std::lround((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
}

Tensor<float> images_to_tensor(const Dataset& ds, const std::vector<int>& idx, bool flip) {
  Tensor<float> t(Shape{static_cast<int>(idx.size()), ds.height, ds.width, 3});
  const std::size_t row = static_cast<std::size_t>(ds.width) * 3;
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const std::uint8_t* src = ds.image(idx[b]);
    float* dst = t.data() + b * ds.image_bytes();
    for (int y = 0; y < ds.height; ++y) {
      for (int x = 0; x < ds.width; ++x) {
        const int sx = flip ? ds.width - 1 - x : x;
        for (int c = 0; c < 3; ++c) {
          dst[y * row + x * 3 + c] = to_model_range(src[y * row + sx * 3 + c]);
        }
      }
    }
  }
  return t;
}

std::vector<Image> tensor_to_images(const Tensor<float>& t) {
  const Shape& s = t.shape();
  if (s.c != 3) throw DataError("expected 3-channel images, got " + s.str());
  std::vector<Image> out;
  const std::size_t per = static_cast<std::size_t>(s.h) * s.w * 3;
  for (int b = 0; b < s.n; ++b) {
    Image img(s.h, s.w);
    for (std::size_t i = 0; i < per; ++i) img.rgb[i] = from_model_range(t[b * per + i]);
    out.push_back(std::move(img));
  }
  return out;
}

Image make_grid(const std::vector<Image>& images, int cols) {
  if (images.empty() || cols < 1) throw DataError("make_grid: nothing to tile");
  const int h = images[0].height;
  const int w = images[0].width;
  const int n = static_cast<int>(images.size());
  const int rows = (n + cols - 1) / cols;
  const int ncols = std::min(cols, n);
  Image grid(rows * (h + 1) - 1, ncols * (w + 1) - 1);
  for (int i = 0; i < n; ++i) {
    if (images[i].height != h || images[i].width != w) {
      throw DataError("make_grid: images differ in size");
    }
    const int oy = (i / cols) * (h + 1);
    const int ox = (i % cols) * (w + 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) grid.at(oy + y, ox + x, c) = images[i].at(y, x, c);
  }
  return grid;
}

// --- batching ----------------------------------------------------------------

BatchIterator::BatchIterator(const Dataset& ds, int batch, std::uint64_t seed,
                             bool drop_last, bool flip)
    : ds_(&ds), batch_(batch), seed_(seed), drop_last_(drop_last), flip_(flip) {
  ds.validate();
  if (batch < 1) throw DataError("batch size must be positive");
  if (drop_last && batch > ds.size) {
    throw DataError("batch size " + std::to_string(batch) + " exceeds dataset size " +
                    std::to_string(ds.size));
  }
  perm_ = permutation(0);
}

std::vector<int> BatchIterator::permutation(std::int64_t epoch) const {
  std::vector<int> p(ds_->size);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(splitmix(seed_ ^ splitmix(static_cast<std::uint64_t>(epoch))));
  for (int i = ds_->size - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

std::int64_t BatchIterator::batches_per_epoch() const {
  return drop_last_ ? ds_->size / batch_ : (ds_->size + batch_ - 1) / batch_;
}

void BatchIterator::advance_epoch() {
  ++state_.epoch;
  state_.cursor = 0;
  perm_ = permutation(state_.epoch);
}

void BatchIterator::restore(State s) {
  state_ = s;
  perm_ = permutation(s.epoch);
}

std::vector<int> BatchIterator::peek_indices() const {
  BatchIterator copy = *this;
  return copy.next().indices;
}

Batch BatchIterator::next() {
  const std::int64_t left = ds_->size - state_.cursor;
  if (left <= 0 || (drop_last_ && left < batch_)) advance_epoch();
  const int take = static_cast<int>(std::min<std::int64_t>(batch_, ds_->size - state_.cursor));
  Batch b;
  b.indices.assign(perm_.begin() + state_.cursor, perm_.begin() + state_.cursor + take);
  const bool flip =
      flip_ && (splitmix(seed_ + 0x51u * static_cast<std::uint64_t>(state_.epoch) +
                         static_cast<std::uint64_t>(state_.cursor)) & 1u);
  state_.cursor += take;
  b.images = images_to_tensor(*ds_, b.indices, flip);
  if (!ds_->labels.empty()) {
    for (int i : b.indices) b.labels.push_back(ds_->labels[i]);
  }
  return b;
}

}  // namespace spn
