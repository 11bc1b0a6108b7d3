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

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <random>

#include "spn/experiment/config.hpp"
#include "spn/metrics/metrics.hpp"

namespace spn {
namespace {

namespace fs = std::filesystem;

Eigen::MatrixXd random_features(int n, int f, std::uint64_t seed, double scale = 1.0, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(n, f);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j) m(i, j) = shift + scale * nd(rng);
  return m;
}

// --- Gaussian summary --------------------------------------------------------

TEST(Summary, HandExample) {
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 9;
  const GaussianSummary s = summarize_features(x);
  EXPECT_EQ(s.count, 3);
  EXPECT_NEAR(s.mean(0), 3.0, 1e-15);
  EXPECT_NEAR(s.mean(1), 5.0, 1e-15);
  EXPECT_NEAR(s.cov(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(s.cov(1, 1), 13.0, 1e-12);
  EXPECT_NEAR(s.cov(0, 1), 7.0, 1e-12);
}

TEST(Summary, MatchesTwoPassOracle) {
  const Eigen::MatrixXd x = random_features(50, 4, 1, 2.0, 1e4);
  const GaussianSummary s = summarize_features(x);
  for (int a = 0; a < 4; ++a) {
    double mean = 0;
    for (int i = 0; i < 50; ++i) mean += x(i, a);
    mean /= 50;
    EXPECT_NEAR(s.mean(a), mean, 1e-9);
    for (int b = 0; b < 4; ++b) {
      double mb = 0;
      for (int i = 0; i < 50; ++i) mb += x(i, b);
      mb /= 50;
      double c = 0;
      for (int i = 0; i < 50; ++i) c += (x(i, a) - mean) * (x(i, b) - mb);
      EXPECT_NEAR(s.cov(a, b), c / 49, 1e-8);
    }
  }
}

TEST(Summary, SingleRowHasZeroCovariance) {
  const GaussianSummary s = summarize_features(random_features(1, 3, 2));
  EXPECT_EQ(s.cov.norm(), 0.0);
}

// --- FID ---------------------------------------------------------------------

GaussianSummary gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  GaussianSummary g;
  g.mean = std::move(mean);
  g.cov = std::move(cov);
  g.count = 100;
  return g;
}

TEST(Frechet, IdenticalSetsGiveZero) {
  const GaussianSummary s = summarize_features(random_features(200, 6, 3));
  EXPECT_NEAR(frechet_distance(s, s), 0.0, 1e-9);
}

TEST(Frechet, UnivariateClosedForm) {
  Eigen::VectorXd m0(1), m1(1);
  m0 << 0;
  m1 << 1;
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd c4 = 4 * Eigen::MatrixXd::Identity(1, 1);
  // (0-1)^2 + 1 + 4 - 2 * 2 = 2
  EXPECT_NEAR(frechet_distance(gaussian(m0, c1), gaussian(m1, c4)), 2.0, 1e-12);
}

TEST(Frechet, DiagonalClosedForm) {
  Eigen::VectorXd ma(3), mb(3), da(3), db(3);
  ma << 1, 2, 3;
  mb << 0, 2, 5;
  da << 1, 0.25, 9;
  db << 4, 1, 0.5;
  double want = (ma - mb).squaredNorm();
  for (int i = 0; i < 3; ++i) want += da(i) + db(i) - 2 * std::sqrt(da(i) * db(i));
  const double got = frechet_distance(gaussian(ma, da.asDiagonal()), gaussian(mb, db.asDiagonal()));
  EXPECT_NEAR(got, want, 1e-10);
}

TEST(Frechet, GeneralMatchesSqrtmOracleAndIsSymmetric) {
  const GaussianSummary a = summarize_features(random_features(40, 5, 4));
  const GaussianSummary b = summarize_features(random_features(40, 5, 5, 1.5, 0.3));
  // Oracle through a general eigendecomposition of Sa Sb.
  Eigen::EigenSolver<Eigen::MatrixXd> es(a.cov * b.cov);
  double tr = 0;
  for (int i = 0; i < 5; ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  const double want = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2 * tr;
  EXPECT_NEAR(frechet_distance(a, b), want, 1e-8);
  EXPECT_NEAR(frechet_distance(a, b), frechet_distance(b, a), 1e-8);
  EXPECT_GT(frechet_distance(a, b), 0.0);
}

TEST(Frechet, RankDeficientCovarianceIsAccepted) {
  const GaussianSummary a = summarize_features(random_features(3, 8, 6));
  const GaussianSummary b = summarize_features(random_features(3, 8, 7));
  EXPECT_TRUE(std::isfinite(frechet_distance(a, b)));
}

TEST(Frechet, NonPsdInputIsRejected) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0, 0, -1;
  EXPECT_THROW(frechet_distance(gaussian(m, bad), gaussian(m, Eigen::MatrixXd::Identity(2, 2))),
               std::domain_error);
}

TEST(Frechet, DimensionMismatchIsRejected) {
  EXPECT_THROW(frechet_distance(summarize_features(random_features(5, 2, 1)),
                                summarize_features(random_features(5, 3, 1))),
               std::invalid_argument);
}

// --- IS ----------------------------------------------------------------------

TEST(InceptionScoreTest, UniformPredictionsScoreOne) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(100, 10, 0.1);
  const InceptionScore s = inception_score(p, 10);
  EXPECT_NEAR(s.mean, 1.0, 1e-12);
  EXPECT_NEAR(s.std, 0.0, 1e-12);
}

TEST(InceptionScoreTest, BalancedOneHotScoresClassCount) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(40, 4);
  for (int i = 0; i < 40; ++i) p(i, i % 4) = 1.0;
  const InceptionScore s = inception_score(p, 5);
  EXPECT_NEAR(s.mean, 4.0, 1e-12);
}

TEST(InceptionScoreTest, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  const int n = 30, k = 5, splits = 3;
  Eigen::MatrixXd p(n, k);
  for (int i = 0; i < n; ++i) {
    double z = 0;
    for (int j = 0; j < k; ++j) z += (p(i, j) = u(rng));
    p.row(i) /= z;
  }
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const int lo = s * n / splits, hi = (s + 1) * n / splits;
    std::vector<double> bar(k, 0.0);
    for (int i = lo; i < hi; ++i)
      for (int j = 0; j < k; ++j) bar[j] += p(i, j) / (hi - lo);
    double kl = 0;
    for (int i = lo; i < hi; ++i)
      for (int j = 0; j < k; ++j) kl += p(i, j) * (std::log(p(i, j)) - std::log(bar[j]));
    scores.push_back(std::exp(kl / (hi - lo)));
  }
  double mean = 0;
  for (double v : scores) mean += v / splits;
  double var = 0;
  for (double v : scores) var += (v - mean) * (v - mean) / splits;
  const InceptionScore got = inception_score(p, splits);
  EXPECT_NEAR(got.mean, mean, 1e-12);
  EXPECT_NEAR(got.std, std::sqrt(var), 1e-12);
}

TEST(InceptionScoreTest, RejectsRowsOffTheSimplex) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(10, 2, 0.5);
  p(3, 0) = 0.7;
  EXPECT_THROW(inception_score(p, 2), std::invalid_argument);
  EXPECT_THROW(inception_score(Eigen::MatrixXd::Constant(3, 2, 0.5), 5), std::invalid_argument);
}

// --- extractor and evaluation ------------------------------------------------------

TEST(Extractor, ShapesAndProbabilities) {
  const ToyExtractor ex(32, 16, 7, 3);
  Tensor<float> imgs(Shape{3, 32, 32, 3}, 0.25f);
  imgs[5] = -1.0f;
  Eigen::MatrixXd f, p;
  ex.extract(imgs, f, p);
  EXPECT_EQ(f.rows(), 3);
  EXPECT_EQ(f.cols(), 16);
  EXPECT_EQ(p.cols(), 7);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
  EXPECT_NE(f.row(0), f.row(1));
  EXPECT_LT((f.row(1) - f.row(2)).norm(), 1e-12);
}

TEST(Extractor, SaveLoadRoundTrip) {
  const fs::path path = fs::temp_directory_path() / "spn_toy_extractor.bin";
  const ToyExtractor a(16, 8, 5, 42);
  a.save(path);
  const ToyExtractor b = ToyExtractor::load(path);
  Tensor<float> imgs(Shape{2, 16, 16, 3});
  for (std::size_t i = 0; i < imgs.size(); ++i) imgs[i] = std::sin(0.1f * static_cast<float>(i));
  Eigen::MatrixXd fa, pa, fb, pb;
  a.extract(imgs, fa, pa);
  b.extract(imgs, fb, pb);
  EXPECT_EQ(fa, fb);
  EXPECT_EQ(pa, pb);
  EXPECT_EQ(make_extractor(path.string())->feature_dim(), 8);
  EXPECT_EQ(make_extractor("toy:64")->input_size(), 64);
  fs::remove(path);
}

ExperimentConfig small_model() {
  ExperimentConfig c;
  c.model.g_width = 8;
  c.model.d_width = 8;
  c.model.z_dim = 16;
  return c;
}

TEST(Evaluate, DeterministicAndFinite) {
  const ExperimentConfig cfg = small_model();
  Generator<float> gen(cfg.generator_spec(0));
  // Populate running statistics so eval mode is usable.
  Tensor<float> z(Shape{8, 1, 1, 16}, 0.3f);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::cos(static_cast<float>(i));
  gen.forward(z, {}, Mode::kTrain);
  const Dataset real = make_shapes_dataset(30, 32, 1);
  const ToyExtractor ex;
  const EvalResult a = evaluate_model(gen, 0, ex, real, 40, 5, 16);
  const EvalResult b = evaluate_model(gen, 0, ex, real, 40, 5, 16);
  EXPECT_EQ(a.fid, b.fid);
  EXPECT_EQ(a.is_mean, b.is_mean);
  EXPECT_EQ(a.samples, 40);
  EXPECT_EQ(a.real_samples, 30);
  EXPECT_TRUE(std::isfinite(a.fid));
  EXPECT_GT(a.fid, 0.0);
  EXPECT_GE(a.is_mean, 1.0);
}

// --- masks ---------------------------------------------------------------------

TEST(Masks, ZeroProjectionGivesHalfAndComplement) {
  const ExperimentConfig cfg = small_model();
  Generator<float> gen(cfg.generator_spec(0));
  ParamRegistry<float> reg;
  gen.collect(reg);
  for (const auto& e : reg.params()) {
    if (e.name.find("mask_proj") != std::string::npos) e.param->value.set_zero();
  }
  Tensor<float> z(Shape{2, 1, 1, 16});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::sin(static_cast<float>(i));
  const std::vector<int> channels{0, 3, 5};
  const MaskVisualization mv = visualize_masks(gen, z, {}, -1, channels, Mode::kTrain);
  EXPECT_EQ(mv.mask.shape(), (Shape{2, 32, 32, 3}));
  for (std::size_t i = 0; i < mv.mask.size(); ++i) {
    ASSERT_NEAR(mv.mask[i], 0.5f, 1e-6);
    ASSERT_NEAR(mv.mask[i] + mv.inverse[i], 1.0f, 1e-6);
  }
  EXPECT_NEAR(mask_spatial_variance(mv.mask), 0.0, 1e-12);
  // 2 samples x {m, m*} rows, 3 channel columns, 1-pixel gaps.
  EXPECT_EQ(mv.grid.height, 4 * 33 - 1);
  EXPECT_EQ(mv.grid.width, 3 * 33 - 1);
  EXPECT_EQ(mv.grid.at(0, 0, 0), 128);
}

TEST(Masks, RandomInitIsComplementaryAndGridRoundTrips) {
  const ExperimentConfig cfg = small_model();
  Generator<float> gen(cfg.generator_spec(0));
  Tensor<float> z(Shape{3, 1, 1, 16});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::cos(1.7f * static_cast<float>(i));
  const MaskVisualization mv = visualize_masks(gen, z, {}, 0, {0, 1}, Mode::kTrain);
  for (std::size_t i = 0; i < mv.mask.size(); ++i) {
    ASSERT_GE(mv.mask[i], 0.0f);
    ASSERT_LE(mv.mask[i], 1.0f);
    ASSERT_NEAR(mv.mask[i] + mv.inverse[i], 1.0f, 1e-6);
  }
  const fs::path path = fs::temp_directory_path() / "spn_mask_grid.png";
  write_png(path, mv.grid);
  const Image back = read_image(path);
  const int tile = mv.mask.shape().h + 1;
  EXPECT_EQ((back.height + 1) / tile, 6);
  EXPECT_EQ((back.width + 1) / tile, 2);
  EXPECT_EQ(back.rgb, mv.grid.rgb);
  fs::remove(path);
}

TEST(Masks, SpatialVarianceOracle) {
  Tensor<float> m(Shape{2, 2, 2, 1});
  const float v[] = {0, 1, 0, 1, 0.5f, 0.5f, 0.5f, 0.5f};
  for (int i = 0; i < 8; ++i) m[i] = v[i];
  EXPECT_NEAR(mask_spatial_variance(m), 0.125, 1e-7);
}

TEST(Masks, BadLayerAndChannelAreRejected) {
  const ExperimentConfig cfg = small_model();
  Generator<float> gen(cfg.generator_spec(0));
  Tensor<float> z(Shape{1, 1, 1, 16});
  EXPECT_THROW(visualize_masks(gen, z, {}, 99, {0}, Mode::kTrain), std::out_of_range);
  EXPECT_THROW(visualize_masks(gen, z, {}, 0, {999}, Mode::kTrain), std::out_of_range);
}

}  // namespace
}  // namespace spn
