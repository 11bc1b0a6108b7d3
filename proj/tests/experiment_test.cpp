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

#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spn/experiment/commands.hpp"
#include "spn/experiment/config.hpp"

namespace spn {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() /
                     ("spn_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

// --- key/value parsing -----------------------------------------------------------

TEST(KeyValuesTest, ParsesCommentsAndWhitespace) {
  const KeyValues kv = parse_key_values("# header\n\n  a = 1 \nb=two words\n# c = 3\na = 4\n", ".");
  EXPECT_EQ(kv.get("a").value(), "4");
  EXPECT_EQ(kv.get("b").value(), "two words");
  EXPECT_FALSE(kv.get("c").has_value());
  EXPECT_EQ(kv.resolved().entries.size(), 2u);
}

TEST(KeyValuesTest, MalformedLinesAreAllReported) {
  const std::string msg = error_of([] { parse_key_values("ok = 1\nnot a pair\n= 3\n", "."); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(KeyValuesTest, IncludesResolveRelativeAndLaterWins) {
  const fs::path dir = scratch_dir();
  fs::create_directories(dir / "sub");
  write_file(dir / "sub" / "base.cfg", "x = 1\ny = 2\n");
  write_file(dir / "top.cfg", "include = sub/base.cfg\ny = 3\n");
  const KeyValues kv = read_key_values(dir / "top.cfg");
  EXPECT_EQ(kv.get("x").value(), "1");
  EXPECT_EQ(kv.get("y").value(), "3");
  fs::remove_all(dir);
}

TEST(KeyValuesTest, IncludeCycleIsBounded) {
  const fs::path dir = scratch_dir();
  write_file(dir / "a.cfg", "include = b.cfg\n");
  write_file(dir / "b.cfg", "include = a.cfg\n");
  EXPECT_THROW(read_key_values(dir / "a.cfg"), ConfigError);
  EXPECT_THROW(read_key_values(dir / "missing.cfg"), ConfigError);
  fs::remove_all(dir);
}

// --- experiment config -----------------------------------------------------------

TEST(ExperimentConfigTest, DefaultsMatchCifarRegime) {
  const ExperimentConfig c;
  EXPECT_EQ(c.train.loss, LossKind::kHinge);
  EXPECT_DOUBLE_EQ(c.train.lr_g, 2e-4);
  EXPECT_DOUBLE_EQ(c.train.adam.beta1, 0.0);
  EXPECT_DOUBLE_EQ(c.train.adam.beta2, 0.9);
  EXPECT_EQ(c.train.n_dis, 5);
  EXPECT_EQ(c.train.batch_d, 64);
  EXPECT_EQ(c.train.batch_g, 128);
  EXPECT_EQ(c.train.total_iters, 50000);
  EXPECT_NO_THROW(c.validate());
}

TEST(ExperimentConfigTest, AppliesKeys) {
  const KeyValues kv = parse_key_values(
      "seed = 7\nmodel.norm = cspn\ntrain.loss = lsgan\ntrain.n_dis = 2\nspn.mask = single\n"
      "masks.channels = 1,4\ndata.flip = true\n",
      ".");
  const ExperimentConfig c = ExperimentConfig::from_key_values(kv);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.model.norm, NormKind::kConditionalSpn);
  EXPECT_EQ(c.train.loss, LossKind::kLsgan);
  EXPECT_EQ(c.train.n_dis, 2);
  EXPECT_EQ(c.model.spn.mask_channels, MaskChannels::kSingle);
  EXPECT_EQ(c.masks.channels, (std::vector<int>{1, 4}));
  EXPECT_TRUE(c.data.flip);
  EXPECT_TRUE(c.conditional());
}

TEST(ExperimentConfigTest, UnknownKeysAndBadValuesAreAggregated) {
  const KeyValues kv = parse_key_values("train.nope = 1\ntrain.n_dis = five\nmodel.norm = ln\n", ".");
  const std::string msg = error_of([&] { ExperimentConfig::from_key_values(kv); });
  EXPECT_NE(msg.find("train.nope"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train.n_dis"), std::string::npos) << msg;
  EXPECT_NE(msg.find("model.norm"), std::string::npos) << msg;
}

TEST(ExperimentConfigTest, ValidationListsEveryViolation) {
  ExperimentConfig c;
  c.train.n_dis = 0;
  c.train.adam.beta2 = 1.5;
  c.data.size = 64;
  c.model.spn.kernel_size = 4;
  const std::string msg = error_of([&] { c.validate(); });
  for (const char* key : {"train.n_dis", "train.beta2", "data.size", "spn.kernel_size"}) {
    EXPECT_NE(msg.find(key), std::string::npos) << key << "\n" << msg;
  }
}

TEST(ExperimentConfigTest, ToTextRoundTrips) {
  ExperimentConfig c;
  c.seed = 99;
  c.out_dir = "runs/x y";
  c.model.norm = NormKind::kBatch;
  c.model.attention = true;
  c.train.lr_d = 4e-4;
  c.train.loss = LossKind::kCe;
  c.masks.channels = {2, 3};
  c.model.spn.affine_conv = AffineConv::kStandard;
  const std::string text = c.to_text();
  const ExperimentConfig back = ExperimentConfig::from_key_values(parse_key_values(text, "."));
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.out_dir, "runs/x y");
  EXPECT_DOUBLE_EQ(back.train.lr_d, 4e-4);
}

TEST(ExperimentConfigTest, SpecsFollowModelSection) {
  ExperimentConfig c;
  c.seed = 3;
  c.model.g_width = 16;
  c.model.z_dim = 32;
  const GeneratorSpec g = c.generator_spec(0);
  EXPECT_EQ(g.z_dim, 32);
  EXPECT_EQ(g.seed, 7u);
  EXPECT_EQ(c.discriminator_spec(0).seed, 8u);
  EXPECT_FALSE(g.spectral);
  c.model.resolution = 128;
  c.data.size = 128;
  EXPECT_TRUE(c.generator_spec(0).spectral);
}

TEST(Sweep, CartesianProductWithNames) {
  const KeyValues kv = parse_key_values(
      "out_dir = runs/s\nsweep.train.loss = hinge,ce,lsgan\nsweep.model.norm = bn,spn\n", ".");
  const auto vs = expand_sweep(kv);
  ASSERT_EQ(vs.size(), 6u);
  EXPECT_EQ(vs[0].name, "loss-hinge_norm-bn");
  EXPECT_EQ(vs[1].name, "loss-hinge_norm-spn");
  EXPECT_EQ(vs[5].name, "loss-lsgan_norm-spn");
  const ExperimentConfig c = ExperimentConfig::from_key_values(vs[3].values);
  EXPECT_EQ(c.train.loss, LossKind::kCe);
  EXPECT_EQ(c.model.norm, NormKind::kSpn);
  EXPECT_EQ(expand_sweep(parse_key_values("seed = 1\n", ".")).front().name, "base");
}

TEST(DataPath, RelativePathsUseDataRoot) {
  ::setenv("SPN_DATA_ROOT", "/data/root", 1);
  EXPECT_EQ(resolve_data_path("cifar"), fs::path("/data/root/cifar"));
  EXPECT_EQ(resolve_data_path("/abs/cifar"), fs::path("/abs/cifar"));
  ::unsetenv("SPN_DATA_ROOT");
  EXPECT_EQ(resolve_data_path("cifar"), fs::path("cifar"));
}

// --- commands --------------------------------------------------------------------

TEST(Commands, InvalidSweepWritesNothing) {
  const fs::path dir = scratch_dir();
  const KeyValues kv = parse_key_values("out_dir = " + (dir / "out").string() +
                                            "\nsweep.train.n_dis = 1,0\nsweep.model.z_dim = 8,-1\n",
                                        ".");
  std::ostringstream log;
  const std::string msg = error_of([&] { commands::ablate(kv, log); });
  EXPECT_NE(msg.find("n_dis-0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("z_dim--1"), std::string::npos) << msg;
  EXPECT_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST(Commands, InvalidTrainConfigWritesNothing) {
  const fs::path dir = scratch_dir();
  ExperimentConfig c;
  c.out_dir = (dir / "out").string();
  c.train.batch_d = 0;
  std::ostringstream log;
  EXPECT_THROW(commands::train(c, log), ConfigError);
  EXPECT_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST(Commands, AuditWritesReport) {
  const fs::path dir = scratch_dir();
  ExperimentConfig c;
  c.out_dir = dir.string();
  c.model.g_width = 16;
  std::ostringstream log;
  const Audit a = commands::audit(c, log);
  EXPECT_GT(a.spn.params, a.bn.params);
  EXPECT_TRUE(fs::exists(dir / "audit.txt"));
  EXPECT_TRUE(fs::exists(dir / "audit.kv"));
  fs::remove_all(dir);
}

TEST(Commands, GradcheckPasses) {
  std::ostringstream log;
  EXPECT_TRUE(commands::gradcheck(Shape{2, 4, 4, 2}, 1, log)) << log.str();
}

TEST(Commands, ClassCountFromDataSection) {
  ExperimentConfig c;
  EXPECT_EQ(commands::configured_num_classes(c), 0);
  c.model.norm = NormKind::kConditionalSpn;
  EXPECT_EQ(commands::configured_num_classes(c), 3);
  c.data.kind = "cifar100";
  EXPECT_EQ(commands::configured_num_classes(c), 100);
}

}  // namespace
}  // namespace spn
