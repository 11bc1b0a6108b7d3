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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "spn/data/dataset.hpp"
#include "spn/data/image_io.hpp"

namespace spn {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("spn_data_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> cifar_record(int label_bytes, int label, std::uint8_t seed) {
  std::vector<std::uint8_t> rec(label_bytes + 3072);
  rec[label_bytes - 1] = static_cast<std::uint8_t>(label);
  if (label_bytes == 2) rec[0] = 7;  // coarse label, ignored
  for (int i = 0; i < 3072; ++i) rec[label_bytes + i] = static_cast<std::uint8_t>(i * 7 + seed);
  return rec;
}

// --- CIFAR -------------------------------------------------------------------

TEST(Cifar, SingleRecordRoundTrip) {
  TempDir dir;
  const auto rec = cifar_record(1, 6, 3);
  write_bytes(dir.path() / "one.bin", rec);
  Dataset ds = load_cifar_files({dir.path() / "one.bin"}, CifarVariant::k10);
  ASSERT_EQ(ds.size, 1);
  EXPECT_EQ(ds.labels, std::vector<int>{6});
  EXPECT_EQ(ds.num_classes, 10);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c)
        ASSERT_EQ(ds.image(0)[(y * 32 + x) * 3 + c], rec[1 + c * 1024 + y * 32 + x]);
}

TEST(Cifar, HundredUsesFineLabel) {
  TempDir dir;
  auto a = cifar_record(2, 42, 0);
  auto b = cifar_record(2, 99, 1);
  a.insert(a.end(), b.begin(), b.end());
  write_bytes(dir.path() / "train.bin", a);
  Dataset ds = load_cifar(dir.path(), CifarVariant::k100);
  EXPECT_EQ(ds.labels, (std::vector<int>{42, 99}));
  EXPECT_EQ(ds.num_classes, 100);
}

TEST(Cifar, TruncatedFileIsRejected) {
  TempDir dir;
  auto rec = cifar_record(1, 1, 0);
  rec.resize(rec.size() - 5);
  write_bytes(dir.path() / "bad.bin", rec);
  try {
    load_cifar_files({dir.path() / "bad.bin"}, CifarVariant::k10);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("corrupt archive"), std::string::npos);
    EXPECT_NE(msg.find("3073"), std::string::npos);
    EXPECT_NE(msg.find("3068"), std::string::npos);
  }
}

TEST(Cifar, MissingFilesAreReported) {
  TempDir dir;
  EXPECT_THROW(load_cifar(dir.path(), CifarVariant::k10), DataError);
}

// --- images ------------------------------------------------------------------

TEST(ImageIo, PngRoundTrip) {
  TempDir dir;
  Image img(5, 7);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 13);
  write_png(dir.path() / "a.png", img);
  Image back = read_image(dir.path() / "a.png");
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.rgb, img.rgb);
}

TEST(ImageIo, RejectsUnknownFormat) {
  TempDir dir;
  write_bytes(dir.path() / "x.png", {1, 2, 3, 4, 5, 6, 7, 8, 9});
  EXPECT_THROW(read_image(dir.path() / "x.png"), DataError);
}

TEST(Resize, ConstantImageStaysConstant) {
  Image img(256, 256);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      img.at(y, x, 0) = 200;
      img.at(y, x, 1) = 17;
      img.at(y, x, 2) = 90;
    }
  Image out = resize_bilinear(img, 128, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      ASSERT_EQ(out.at(y, x, 0), 200);
      ASSERT_EQ(out.at(y, x, 1), 17);
      ASSERT_EQ(out.at(y, x, 2), 90);
    }
}

// Reference resampler written from the half-pixel definition, in double.
double reference_bilinear(const Image& src, double sy, double sx, int y, int x, int c) {
  auto clampd = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
  const double fy = clampd((y + 0.5) * sy - 0.5, src.height - 1.0);
  const double fx = clampd((x + 0.5) * sx - 0.5, src.width - 1.0);
  double acc = 0;
  for (int yy = 0; yy < src.height; ++yy) {
    const double wy = std::max(0.0, 1.0 - std::abs(fy - yy));
    for (int xx = 0; xx < src.width; ++xx) {
      const double wx = std::max(0.0, 1.0 - std::abs(fx - xx));
      acc += wy * wx * src.at(yy, xx, c);
    }
  }
  return acc;
}

TEST(Resize, CheckerboardMatchesReference) {
  Image img(24, 20);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 20; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = ((y / 3 + x / 2) % 2) ? 255 : 10 * c;
  for (auto [oh, ow] : {std::pair{8, 8}, std::pair{13, 7}, std::pair{40, 33}}) {
    Image out = resize_bilinear(img, oh, ow);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int c = 0; c < 3; ++c) {
          const double want = reference_bilinear(img, 24.0 / oh, 20.0 / ow, y, x, c);
          ASSERT_LE(std::abs(out.at(y, x, c) - want), 1.0) << y << "," << x;
        }
  }
}

TEST(ImageFolder, ClassesFromSubdirectories) {
  TempDir dir;
  for (const char* cls : {"b_tower", "a_church", "c_bridge"}) {
    fs::create_directories(dir.path() / cls);
    for (int i = 0; i < 2; ++i) {
      Image img(40, 30);
      std::fill(img.rgb.begin(), img.rgb.end(), static_cast<std::uint8_t>(cls[0] + i));
      write_png(dir.path() / cls / ("img" + std::to_string(i) + ".png"), img);
    }
  }
  write_bytes(dir.path() / "a_church" / "broken.png", {0x89, 'P', 'N', 'G', 0, 0, 0, 0});
  Dataset ds = load_image_folder(dir.path(), 16);
  EXPECT_EQ(ds.size, 6);
  EXPECT_EQ(ds.num_classes, 3);
  EXPECT_EQ(ds.height, 16);
  EXPECT_EQ(ds.class_names[0], "a_church");
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 0, 1, 1, 2, 2}));
  EXPECT_EQ(ds.image(0)[0], 'a');
}

TEST(ImageFolder, EmptyFolderIsAnError) {
  TempDir dir;
  fs::create_directories(dir.path() / "only");
  EXPECT_THROW(load_image_folder(dir.path()), DataError);
}

// --- range mapping -------------------------------------------------------------

TEST(RangeMapping, Endpoints) {
  EXPECT_EQ(to_model_range(0), -1.0f);
  EXPECT_EQ(to_model_range(255), 1.0f);
  EXPECT_EQ(from_model_range(-1.0f), 0);
  EXPECT_EQ(from_model_range(1.0f), 255);
  EXPECT_EQ(from_model_range(3.0f), 255);
}

TEST(RangeMapping, RoundTripAndMonotone) {
  for (int v = 0; v < 256; ++v) {
    const auto u = static_cast<std::uint8_t>(v);
    ASSERT_EQ(from_model_range(to_model_range(u)), u);
    if (v > 0) ASSERT_LT(to_model_range(static_cast<std::uint8_t>(v - 1)), to_model_range(u));
  }
}

// --- batching ----------------------------------------------------------------

Dataset tiny_dataset(int n) {
  Dataset ds;
  ds.size = n;
  ds.height = 2;
  ds.width = 2;
  ds.pixels.resize(static_cast<std::size_t>(n) * 12);
  for (int i = 0; i < n; ++i) std::fill_n(ds.pixels.begin() + i * 12, 12, static_cast<std::uint8_t>(i % 256));
  return ds;
}

TEST(BatchIterator, SeedFixedFirstBatch) {
  Dataset ds = tiny_dataset(50);
  BatchIterator a(ds, 8, 3), b(ds, 8, 3);
  EXPECT_EQ(a.next().indices, b.next().indices);
}

TEST(BatchIterator, EpochCoversDatasetMinusRemainder) {
  Dataset ds = tiny_dataset(50);
  BatchIterator it(ds, 8, 1);
  std::multiset<int> seen;
  for (int i = 0; i < it.batches_per_epoch(); ++i) {
    Batch b = it.next();
    ASSERT_EQ(b.indices.size(), 8u);
    ASSERT_EQ(b.images.shape(), (Shape{8, 2, 2, 3}));
    seen.insert(b.indices.begin(), b.indices.end());
  }
  EXPECT_EQ(seen.size(), 48u);
  EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), 48u);
  // The next batch starts a new permutation.
  const std::vector<int> p1 = it.permutation(1);
  EXPECT_EQ(it.next().indices, std::vector<int>(p1.begin(), p1.begin() + 8));
}

TEST(BatchIterator, PartialBatchWithoutDropLast) {
  Dataset ds = tiny_dataset(10);
  BatchIterator it(ds, 4, 0, false);
  EXPECT_EQ(it.next().indices.size(), 4u);
  EXPECT_EQ(it.next().indices.size(), 4u);
  EXPECT_EQ(it.next().indices.size(), 2u);
  EXPECT_EQ(it.next().indices.size(), 4u);
}

TEST(BatchIterator, SeedsGiveDifferentPermutations) {
  Dataset ds = tiny_dataset(1000);
  BatchIterator a(ds, 10, 1), b(ds, 10, 2);
  const auto pa = a.permutation(0);
  const auto pb = b.permutation(0);
  EXPECT_NE(pa, pb);
  auto sorted = pa;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sorted[i], i);
  EXPECT_NE(a.permutation(0), a.permutation(1));
}

TEST(BatchIterator, RestoreResumesStream) {
  Dataset ds = tiny_dataset(30);
  BatchIterator a(ds, 7, 9);
  for (int i = 0; i < 5; ++i) a.next();
  BatchIterator b(ds, 7, 9);
  b.restore(a.state());
  for (int i = 0; i < 6; ++i) ASSERT_EQ(a.next().indices, b.next().indices);
}

TEST(BatchIterator, LabelsFollowIndices) {
  Dataset ds = tiny_dataset(20);
  ds.num_classes = 4;
  for (int i = 0; i < 20; ++i) ds.labels.push_back(i % 4);
  BatchIterator it(ds, 5, 0);
  Batch b = it.next();
  for (std::size_t i = 0; i < b.indices.size(); ++i) EXPECT_EQ(b.labels[i], b.indices[i] % 4);
}

TEST(BatchIterator, RejectsOversizedBatch) {
  Dataset ds = tiny_dataset(3);
  EXPECT_THROW(BatchIterator(ds, 4, 0), DataError);
}

// --- shapes ------------------------------------------------------------------

TEST(Shapes, DeterministicAndLabelled) {
  Dataset a = make_shapes_dataset(40, 32, 5);
  Dataset b = make_shapes_dataset(40, 32, 5);
  Dataset c = make_shapes_dataset(40, 32, 6);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_NE(a.pixels, c.pixels);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.num_classes, 3);
  std::set<int> labels(a.labels.begin(), a.labels.end());
  EXPECT_EQ(labels.size(), 3u);
}

TEST(Shapes, ImagesAreNotFlat) {
  Dataset ds = make_shapes_dataset(10, 64, 1);
  for (int i = 0; i < ds.size; ++i) {
    const std::uint8_t* img = ds.image(i);
    const auto [lo, hi] = std::minmax_element(img, img + ds.image_bytes());
    EXPECT_GT(*hi - *lo, 60);
  }
}

TEST(Grid, TilesWithGaps) {
  std::vector<Image> tiles(5, Image(3, 4));
  for (std::size_t i = 0; i < tiles.size(); ++i) std::fill(tiles[i].rgb.begin(), tiles[i].rgb.end(), 10 * (i + 1));
  Image g = make_grid(tiles, 2);
  EXPECT_EQ(g.height, 3 * 4 - 1);
  EXPECT_EQ(g.width, 4 * 2 + 1);
  EXPECT_EQ(g.at(0, 0, 0), 10);
  EXPECT_EQ(g.at(0, 5, 0), 20);
  EXPECT_EQ(g.at(8, 0, 0), 50);
  EXPECT_EQ(g.at(3, 0, 0), 0);
}

}  // namespace
}  // namespace spn
