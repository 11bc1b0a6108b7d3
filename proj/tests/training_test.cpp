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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "spn/io/checkpoint.hpp"
#include "spn/training/losses.hpp"
#include "spn/training/optim.hpp"
#include "spn/training/trainer.hpp"
#include "test_util.hpp"

namespace spn {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() /
                     ("spn_train_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor<double> logits(std::initializer_list<double> v) {
  Tensor<double> t(Shape{static_cast<int>(v.size()), 1, 1, 1});
  std::size_t i = 0;
  for (double x : v) t[i++] = x;
  return t;
}

template <typename T>
std::vector<T> vec(const Tensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

// --- losses ------------------------------------------------------------------

TEST(Loss, HingeSatisfiedMarginsAreZero) {
  const auto d = discriminator_loss(LossKind::kHinge, logits({2, 1.5}), logits({-3, -1}));
  EXPECT_EQ(d.value, 0.0);
  for (double g : d.d_real.values()) EXPECT_EQ(g, 0.0);
  for (double g : d.d_fake.values()) EXPECT_EQ(g, 0.0);
}

TEST(Loss, ZeroLogits) {
  const auto z = logits({0, 0, 0});
  EXPECT_NEAR(discriminator_loss(LossKind::kHinge, z, z).value, 2.0, 1e-15);
  EXPECT_NEAR(discriminator_loss(LossKind::kCe, z, z).value, 2 * std::log(2.0), 1e-15);
  EXPECT_NEAR(discriminator_loss(LossKind::kLsgan, z, z).value, 0.5, 1e-15);
  EXPECT_NEAR(generator_loss(LossKind::kHinge, z).value, 0.0, 1e-15);
  EXPECT_NEAR(generator_loss(LossKind::kCe, z).value, std::log(2.0), 1e-15);
  EXPECT_NEAR(generator_loss(LossKind::kLsgan, z).value, 0.5, 1e-15);
}

struct LossOracle {
  double d;
  double g;
};

LossOracle oracle(LossKind k, const Tensor<double>& r, const Tensor<double>& f) {
  double dr = 0, df = 0, g = 0;
  for (double x : r.values()) {
    dr += k == LossKind::kHinge ? std::max(0.0, 1 - x) : k == LossKind::kCe ? softplus(-x) : 0.5 * (x - 1) * (x - 1);
  }
  for (double x : f.values()) {
    df += k == LossKind::kHinge ? std::max(0.0, 1 + x) : k == LossKind::kCe ? softplus(x) : 0.5 * x * x;
    g += k == LossKind::kHinge ? -x : k == LossKind::kCe ? softplus(-x) : 0.5 * (x - 1) * (x - 1);
  }
  return {dr / static_cast<double>(r.size()) + df / static_cast<double>(f.size()), g / static_cast<double>(f.size())};
}

TEST(Loss, MatchesOracleAndFiniteDifferences) {
  const Tensor<double> r = random_tensor(Shape{7, 1, 1, 1}, 1, 2.0);
  const Tensor<double> f = random_tensor(Shape{5, 1, 1, 1}, 2, 2.0);
  for (LossKind k : {LossKind::kHinge, LossKind::kCe, LossKind::kLsgan}) {
    SCOPED_TRACE(to_string(k));
    const auto d = discriminator_loss(k, r, f);
    const auto g = generator_loss(k, f);
    const LossOracle o = oracle(k, r, f);
    EXPECT_NEAR(d.value, o.d, 1e-12);
    EXPECT_NEAR(g.value, o.g, 1e-12);
    const double h = 1e-6;
    for (std::size_t i = 0; i < r.size(); ++i) {
      Tensor<double> rp = r, rm = r;
      rp[i] += h;
      rm[i] -= h;
      EXPECT_NEAR(d.d_real[i], (oracle(k, rp, f).d - oracle(k, rm, f).d) / (2 * h), 1e-7);
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      Tensor<double> fp = f, fm = f;
      fp[i] += h;
      fm[i] -= h;
      EXPECT_NEAR(d.d_fake[i], (oracle(k, r, fp).d - oracle(k, r, fm).d) / (2 * h), 1e-7);
      EXPECT_NEAR(g.d_fake[i], (oracle(k, r, fp).g - oracle(k, r, fm).g) / (2 * h), 1e-7);
    }
  }
}

TEST(Loss, CeIsStableForLargeLogits) {
  const auto d = discriminator_loss(LossKind::kCe, logits({800}), logits({-800}));
  EXPECT_TRUE(std::isfinite(d.value));
  EXPECT_NEAR(d.value, 0.0, 1e-12);
  EXPECT_NEAR(generator_loss(LossKind::kCe, logits({-800})).value, 800.0, 1e-9);
}

TEST(Loss, ParseNames) {
  EXPECT_EQ(parse_loss_kind("hinge"), LossKind::kHinge);
  EXPECT_EQ(parse_loss_kind("LSGAN"), LossKind::kLsgan);
  EXPECT_EQ(parse_loss_kind(to_string(LossKind::kCe)), LossKind::kCe);
  EXPECT_THROW(parse_loss_kind("wasserstein"), std::invalid_argument);
}

// --- schedule and optimizer ----------------------------------------------------

TEST(LrSchedule, ConstantThenLinearToZero) {
  LrSchedule s{2e-4, 4e-4, 100, 50};
  EXPECT_DOUBLE_EQ(s.at(0).first, 2e-4);
  EXPECT_DOUBLE_EQ(s.at(50).second, 4e-4);
  EXPECT_DOUBLE_EQ(s.at(75).first, 1e-4);
  EXPECT_DOUBLE_EQ(s.at(100).first, 0.0);
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    ASSERT_LE(s.factor(i), prev);
    prev = s.factor(i);
  }
}

TEST(LrSchedule, FullDecayAndNoDecay) {
  LrSchedule full{1.0, 1.0, 10, 10};
  EXPECT_DOUBLE_EQ(full.factor(0), 1.0);
  EXPECT_DOUBLE_EQ(full.factor(5), 0.5);
  LrSchedule none{1.0, 1.0, 10, 0};
  EXPECT_DOUBLE_EQ(none.factor(9), 1.0);
}

TEST(Adam, MatchesReferenceRecurrence) {
  Param<double> p(Shape{1, 1, 1, 3});
  p.value[0] = 1.0;
  p.value[1] = -2.0;
  p.value[2] = 0.5;
  ParamRegistry<double> reg;
  reg.add("w", p);
  AdamConfig cfg{0.5, 0.9, 1e-8};
  Adam<double> opt(reg, cfg);
  std::vector<double> w = {1.0, -2.0, 0.5}, m(3, 0), v(3, 0);
  for (int t = 1; t <= 6; ++t) {
    for (int j = 0; j < 3; ++j) p.grad[j] = std::sin(3.0 * t + j) * (j + 1);
    opt.step(0.01);
    for (int j = 0; j < 3; ++j) {
      const double g = std::sin(3.0 * t + j) * (j + 1);
      m[j] = 0.5 * m[j] + 0.5 * g;
      v[j] = 0.9 * v[j] + 0.1 * g * g;
      const double mh = m[j] / (1 - std::pow(0.5, t));
      const double vh = v[j] / (1 - std::pow(0.9, t));
      w[j] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      ASSERT_NEAR(p.value[j], w[j], 1e-12) << "t=" << t;
    }
  }
  EXPECT_EQ(opt.steps(), 6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Param<float> p(Shape{1, 1, 1, 2});
  p.grad[0] = 3.0f;
  p.grad[1] = -0.01f;
  ParamRegistry<float> reg;
  reg.add("w", p);
  Adam<float> opt(reg, AdamConfig{});
  opt.step(1e-3);
  EXPECT_NEAR(p.value[0], -1e-3, 1e-8);
  EXPECT_NEAR(p.value[1], 1e-3, 1e-8);
}

TEST(Adam, StateRoundTripsThroughCheckpoint) {
  Param<double> p(Shape{1, 1, 2, 2}), q(Shape{1, 1, 2, 2});
  ParamRegistry<double> rp, rq;
  rp.add("w", p);
  rq.add("w", q);
  Adam<double> a(rp, AdamConfig{}), b(rq, AdamConfig{});
  for (int t = 0; t < 3; ++t) {
    for (std::size_t j = 0; j < 4; ++j) p.grad[j] = 0.3 * t - static_cast<double>(j);
    a.step(0.1);
  }
  Checkpoint c;
  a.save(c, "opt");
  b.load(c, "opt");
  q.value = p.value;
  for (std::size_t j = 0; j < 4; ++j) p.grad[j] = q.grad[j] = 1.0 + static_cast<double>(j);
  a.step(0.1);
  b.step(0.1);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(p.value[j], q.value[j]);
  EXPECT_EQ(b.steps(), 4);
}

// --- checkpoint format -----------------------------------------------------------

TEST(CheckpointFile, RoundTrip) {
  const fs::path dir = scratch_dir();
  Checkpoint c;
  c.f32["a"] = Tensor<float>(Shape{2, 1, 3, 1}, 1.5f);
  c.f64["b.c"] = random_tensor(Shape{1, 2, 2, 2}, 3);
  c.text["note"] = std::string("multi\nline\0text", 15);
  save_checkpoint(dir / "x.bin", c);
  const Checkpoint r = load_checkpoint(dir / "x.bin");
  EXPECT_EQ(r.f32.at("a").shape(), (Shape{2, 1, 3, 1}));
  EXPECT_EQ(vec(r.f32.at("a")), vec(c.f32.at("a")));
  EXPECT_EQ(vec(r.f64.at("b.c")), vec(c.f64.at("b.c")));
  EXPECT_EQ(r.get_text("note"), c.text.at("note"));
  EXPECT_FALSE(fs::exists(dir / "x.bin.tmp"));
  EXPECT_THROW(r.get_text("missing"), CheckpointError);
  fs::remove_all(dir);
}

TEST(CheckpointFile, RejectsCorruptFiles) {
  const fs::path dir = scratch_dir();
  Checkpoint c;
  c.f32["a"] = Tensor<float>(Shape{4, 4, 4, 4}, 1.0f);
  save_checkpoint(dir / "ok.bin", c);
  std::string bytes;
  {
    std::ifstream in(dir / "ok.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream(dir / name, std::ios::binary) << data;
    return dir / name;
  };
  EXPECT_THROW(load_checkpoint(write("short.bin", bytes.substr(0, bytes.size() - 10))), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(write("magic.bin", magic)), CheckpointError);
  std::string version = bytes;
  version[8] = 99;
  EXPECT_THROW(load_checkpoint(write("version.bin", version)), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "absent.bin"), CheckpointError);
  fs::remove_all(dir);
}

TEST(CheckpointFile, RegistryMismatchListsNames) {
  Param<float> a(Shape{1, 1, 1, 2}), b(Shape{1, 1, 1, 3});
  ParamRegistry<float> reg;
  reg.add("a", a);
  reg.add("b", b);
  Checkpoint c;
  c.f32["a"] = Tensor<float>(Shape{1, 1, 1, 5});
  try {
    restore_registry(c, reg);
    FAIL();
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("a"), std::string::npos);
    EXPECT_NE(msg.find("b"), std::string::npos);
  }
}

// --- trainer -------------------------------------------------------------------

ExperimentConfig tiny_config(const fs::path& out = "unused") {
  ExperimentConfig c;
  c.out_dir = out.string();
  c.seed = 11;
  c.data.kind = "shapes";
  c.data.count = 64;
  c.data.size = 32;
  c.model.resolution = 32;
  c.model.norm = NormKind::kSpn;
  c.model.g_width = 8;
  c.model.d_width = 8;
  c.model.z_dim = 16;
  c.train.n_dis = 2;
  c.train.batch_d = 4;
  c.train.batch_g = 4;
  c.train.total_iters = 20;
  c.train.decay_last_iters = 10;
  c.train.checkpoint_every = 0;
  c.train.sample_every = 0;
  return c;
}

void expect_same_params(const ParamRegistry<float>& a, const ParamRegistry<float>& b, double tol) {
  ASSERT_EQ(a.params().size(), b.params().size());
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const auto& x = a.params()[i].param->value;
    const auto& y = b.params()[i].param->value;
    for (std::size_t j = 0; j < x.size(); ++j) ASSERT_NEAR(x[j], y[j], tol) << a.params()[i].name;
  }
}

TEST(Trainer, DiscriminatorStepsUseDistinctBatches) {
  ExperimentConfig cfg = tiny_config();
  cfg.train.n_dis = 5;
  const Dataset data = load_dataset(cfg.data);
  Trainer t(cfg, data);
  t.step();
  ASSERT_EQ(t.last_batches().size(), 5u);
  std::set<int> rows;
  for (const auto& b : t.last_batches()) rows.insert(b.begin(), b.end());
  EXPECT_EQ(rows.size(), 20u);
}

TEST(Trainer, IsDeterministic) {
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = load_dataset(cfg.data);
  Trainer a(cfg, data), b(cfg, data);
  for (int i = 0; i < 3; ++i) {
    const StepMetrics ma = a.step();
    const StepMetrics mb = b.step();
    EXPECT_EQ(ma.d_loss, mb.d_loss);
    EXPECT_EQ(ma.g_loss, mb.g_loss);
  }
  expect_same_params(a.generator_params(), b.generator_params(), 0.0);
  expect_same_params(a.discriminator_params(), b.discriminator_params(), 0.0);
}

TEST(Trainer, ZeroDiscriminatorGivesConstantGeneratorLoss) {
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = load_dataset(cfg.data);
  Trainer t(cfg, data);
  for (const auto& e : t.discriminator_params().params()) e.param->value.set_zero();
  for (int i = 0; i < 3; ++i) {
    const StepMetrics m = t.step();
    EXPECT_EQ(m.g_loss, 0.0);
    EXPECT_EQ(m.d_loss, 2.0);
    EXPECT_EQ(m.grad_norm_g, 0.0);
  }
}

TEST(Trainer, EveryParameterReceivesGradient) {
  ExperimentConfig cfg = tiny_config();
  cfg.model.attention = true;
  const Dataset data = load_dataset(cfg.data);
  Trainer t(cfg, data);
  t.step();  // moves zero-initialized gates off their dead point
  t.step();
  for (const auto* reg : {&t.generator_params(), &t.discriminator_params()}) {
    for (const auto& e : reg->params()) {
      double norm = 0;
      for (float g : e.param->grad.values()) norm += std::abs(g);
      EXPECT_GT(norm, 0.0) << e.name;
    }
  }
}

TEST(Trainer, ConditionalTrainingRuns) {
  ExperimentConfig cfg = tiny_config();
  cfg.model.norm = NormKind::kConditionalSpn;
  const Dataset data = load_dataset(cfg.data);
  Trainer t(cfg, data);
  EXPECT_EQ(t.num_classes(), 3);
  const StepMetrics m = t.step();
  EXPECT_TRUE(std::isfinite(m.d_loss));
  std::vector<int> cls;
  const Tensor<float> s = t.sample(6, 1, &cls);
  EXPECT_EQ(cls, (std::vector<int>{0, 1, 2, 0, 1, 2}));
  EXPECT_EQ(s.shape(), (Shape{6, 32, 32, 3}));
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const fs::path dir = scratch_dir();
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = load_dataset(cfg.data);
  Trainer full(cfg, data);
  for (int i = 0; i < 4; ++i) full.step();

  Trainer first(cfg, data);
  first.step();
  first.step();
  save_checkpoint(dir / "mid.bin", first.checkpoint());
  Trainer second(cfg, data);
  second.restore(load_checkpoint(dir / "mid.bin"));
  EXPECT_EQ(second.iteration(), 2);
  StepMetrics last;
  for (int i = 0; i < 2; ++i) last = second.step();
  EXPECT_EQ(last.iter, 4);
  expect_same_params(full.generator_params(), second.generator_params(), 1e-6);
  expect_same_params(full.discriminator_params(), second.discriminator_params(), 1e-6);
  fs::remove_all(dir);
}

TEST(Trainer, NonFiniteParameterIsNamed) {
  const ExperimentConfig cfg = tiny_config();
  const Dataset data = load_dataset(cfg.data);
  Trainer t(cfg, data);
  const auto& e = t.generator_params().params().front();
  e.param->value[0] = std::nanf("");
  try {
    t.step();
    FAIL();
  } catch (const NumericError& err) {
    EXPECT_NE(std::string(err.what()).find(e.name), std::string::npos) << err.what();
  }
}

TEST(Trainer, RejectsResolutionMismatch) {
  ExperimentConfig cfg = tiny_config();
  const Dataset data = make_shapes_dataset(8, 16, 0);
  EXPECT_THROW(Trainer(cfg, data), ConfigError);
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST(RunTraining, WritesArtifactsAndResumes) {
  const fs::path dir = scratch_dir();
  ExperimentConfig cfg = tiny_config(dir / "a");
  cfg.train.total_iters = 5;
  cfg.train.decay_last_iters = 0;
  cfg.train.sample_every = 5;
  const TrainingResult r = run_training(cfg);
  EXPECT_EQ(r.iterations, 5);
  const auto log = lines_of(dir / "a" / "metrics.log");
  ASSERT_EQ(log.size(), 6u);
  EXPECT_EQ(log[0], "# iter d_loss g_loss lr_g lr_d");
  EXPECT_EQ(log[5].substr(0, 2), "5 ");
  EXPECT_TRUE(fs::exists(dir / "a" / "checkpoints" / "latest.bin"));
  EXPECT_TRUE(fs::exists(dir / "a" / "samples" / "iter_0000005.png"));
  EXPECT_TRUE(fs::exists(dir / "a" / "config.txt"));

  ExperimentConfig cut = cfg;
  cut.out_dir = (dir / "b").string();
  cut.train.total_iters = 3;
  run_training(cut);
  cut.train.total_iters = 5;
  run_training(cut);
  EXPECT_EQ(lines_of(dir / "b" / "metrics.log"), log);

  const LoadedGenerator g = load_generator(dir / "a" / "checkpoints" / "latest.bin");
  EXPECT_EQ(g.cfg.to_text(), cfg.to_text());
  fs::remove_all(dir);
}

TEST(RunTraining, MetricsLineFormat) {
  StepMetrics m;
  m.iter = 12;
  m.d_loss = 1.5;
  m.g_loss = -0.25;
  m.lr_g = 2e-4;
  m.lr_d = 1e-4;
  EXPECT_EQ(format_metrics_line(m, nullptr), "12 1.5 -0.25 0.0002 0.0001");
  const double wall = 3.14159;
  EXPECT_EQ(format_metrics_line(m, &wall), "12 1.5 -0.25 0.0002 0.0001 3.142");
}

}  // namespace
}  // namespace spn
