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

#include "spn/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "spn/ops.hpp"

namespace spn {
namespace {

namespace fs = std::filesystem;

int dataset_classes(const ExperimentConfig& cfg, const Dataset& data) {
  if (!cfg.conditional()) return 0;
  if (data.labels.empty() || data.num_classes < 1) {
    throw ConfigError("model.norm=" + to_string(cfg.model.norm) + " needs a labelled dataset");
  }
  return data.num_classes;
}

ParamRegistry<float> registry_of(Generator<float>& g) {
  ParamRegistry<float> r;
  g.collect(r);
  return r;
}

ParamRegistry<float> registry_of(Discriminator<float>& d) {
  ParamRegistry<float> r;
  d.collect(r);
  return r;
}

std::vector<int> concat(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::string pad_iter(std::int64_t iter) {
  std::ostringstream os;
  os << std::setw(7) << std::setfill('0') << iter;
  return os.str();
}

}  // namespace

Trainer::Trainer(const ExperimentConfig& cfg, const Dataset& data)
    : cfg_(cfg),
      data_(&data),
      num_classes_(dataset_classes(cfg, data)),
      gen_(cfg.generator_spec(num_classes_)),
      dis_(cfg.discriminator_spec(num_classes_)),
      gen_reg_(registry_of(gen_)),
      dis_reg_(registry_of(dis_)),
      opt_g_(gen_reg_, cfg.train.adam),
      opt_d_(dis_reg_, cfg.train.adam),
      batches_(data, cfg.train.batch_d, cfg.seed, true, cfg.data.flip),
      rng_(cfg.seed * 0x9E3779B97F4A7C15ull + 7) {
  if (data.height != cfg.model.resolution || data.width != cfg.model.resolution) {
    throw ConfigError("dataset images are " + std::to_string(data.height) + "x" +
                      std::to_string(data.width) + " but model.resolution is " +
                      std::to_string(cfg.model.resolution));
  }
}

Tensor<float> Trainer::draw_latents(int n, Rng& rng) const {
  Tensor<float> z(Shape{n, 1, 1, cfg_.model.z_dim});
  std::normal_distribution<float> nd(0.0f, 1.0f);
  for (float& v : z.values()) v = nd(rng);
  return z;
}

std::vector<int> Trainer::draw_classes(int n, Rng& rng) const {
  std::vector<int> c;
  if (num_classes_ == 0) return c;
  for (int i = 0; i < n; ++i) c.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(num_classes_)));
  return c;
}

void Trainer::fail_non_finite(const std::string& what) const {
  std::string names;
  auto scan = [&](const ParamRegistry<float>& reg) {
    for (const auto& e : reg.params()) {
      if (!e.param->value.all_finite()) names += "\n  " + e.name + " (value)";
      if (!e.param->grad.all_finite()) names += "\n  " + e.name + " (grad)";
    }
  };
  scan(gen_reg_);
  scan(dis_reg_);
  if (names.empty()) names = "\n  (all parameters finite; non-finite activations)";
  throw NumericError("non-finite " + what + " at iteration " + std::to_string(iter_ + 1) +
                     "; offending tensors:" + names);
}

StepMetrics Trainer::step() {
  const auto [lr_g, lr_d] = cfg_.train.schedule().at(iter_);
  StepMetrics m;
  m.lr_g = lr_g;
  m.lr_d = lr_d;
  last_batches_.clear();
  const bool cond = num_classes_ > 0;
  try {
    for (int k = 0; k < cfg_.train.n_dis; ++k) {
      Batch real = batches_.next();
      last_batches_.push_back(real.indices);
      const int b = real.images.shape().n;
      Tensor<float> z = draw_latents(b, rng_);
      std::vector<int> fake_cls = draw_classes(b, rng_);
      Tensor<float> fake = gen_.forward(z, fake_cls, Mode::kTrain);
      Tensor<float> both = ops::concat_batch(real.images, fake);
      const std::vector<int> cls = cond ? concat(real.labels, fake_cls) : std::vector<int>{};
      Tensor<float> logits = dis_.forward(both, cls, Mode::kTrain);
      DLoss<float> loss = discriminator_loss(cfg_.train.loss, ops::slice_batch(logits, 0, b),
                                             ops::slice_batch(logits, b, b));
      if (!std::isfinite(loss.value)) fail_non_finite("discriminator loss");
      dis_reg_.zero_grad();
      dis_.backward(ops::concat_batch(loss.d_real, loss.d_fake));
      m.grad_norm_d = grad_norm(dis_reg_);
      if (!std::isfinite(m.grad_norm_d)) fail_non_finite("discriminator gradient");
      opt_d_.step(lr_d);
      m.d_loss += loss.value / cfg_.train.n_dis;
    }

    const int bg = cfg_.train.batch_g;
    Tensor<float> z = draw_latents(bg, rng_);
    std::vector<int> cls = draw_classes(bg, rng_);
    Tensor<float> fake = gen_.forward(z, cls, Mode::kTrain);
    Tensor<float> logits = dis_.forward(fake, cls, Mode::kTrain);
    GLoss<float> loss = generator_loss(cfg_.train.loss, logits);
    if (!std::isfinite(loss.value)) fail_non_finite("generator loss");
    gen_reg_.zero_grad();
    gen_.backward(dis_.backward(loss.d_fake));
    m.grad_norm_g = grad_norm(gen_reg_);
    if (!std::isfinite(m.grad_norm_g)) fail_non_finite("generator gradient");
    opt_g_.step(lr_g);
    m.g_loss = loss.value;
  } catch (const NumericError& e) {
    if (std::string(e.what()).find("offending tensors") != std::string::npos) throw;
    fail_non_finite(std::string("values (") + e.what() + ")");
  }
  m.iter = ++iter_;
  return m;
}

Tensor<float> Trainer::sample(int n, std::uint64_t seed, std::vector<int>* classes) {
  Rng rng(seed);
  Tensor<float> z = draw_latents(n, rng);
  std::vector<int> cls;
  for (int i = 0; num_classes_ > 0 && i < n; ++i) cls.push_back(i % num_classes_);
  if (classes) *classes = cls;
  return gen_.forward(z, cls, Mode::kEval);
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  store_registry(c, gen_reg_);
  store_registry(c, dis_reg_);
  opt_g_.save(c, "opt_g");
  opt_d_.save(c, "opt_d");
  std::ostringstream rng;
  rng << rng_;
  c.text["train.rng"] = rng.str();
  c.text["train.iteration"] = std::to_string(iter_);
  c.text["data.epoch"] = std::to_string(batches_.state().epoch);
  c.text["data.cursor"] = std::to_string(batches_.state().cursor);
  c.text["config"] = cfg_.to_text();
  c.text["num_classes"] = std::to_string(num_classes_);
  c.text["version"] = version_stamp();
  return c;
}

void Trainer::restore(const Checkpoint& c) {
  restore_registry(c, gen_reg_);
  restore_registry(c, dis_reg_);
  opt_g_.load(c, "opt_g");
  opt_d_.load(c, "opt_d");
  std::istringstream rng(c.get_text("train.rng"));
  rng >> rng_;
  if (!rng) throw CheckpointError("corrupt RNG state in checkpoint");
  iter_ = std::stoll(c.get_text("train.iteration"));
  batches_.restore({std::stoll(c.get_text("data.epoch")), std::stoll(c.get_text("data.cursor"))});
}

LoadedGenerator load_generator(const fs::path& path) {
  const Checkpoint c = load_checkpoint(path);
  LoadedGenerator out;
  out.cfg = ExperimentConfig::from_key_values(parse_key_values(c.get_text("config"), "."));
  out.num_classes = std::stoi(c.get_text("num_classes"));
  GeneratorSpec spec = out.cfg.generator_spec(out.num_classes);
  spec.init_weights = false;
  out.gen = std::make_unique<Generator<float>>(spec);
  ParamRegistry<float> reg;
  out.gen->collect(reg);
  restore_registry(c, reg);
  return out;
}

std::string format_metrics_line(const StepMetrics& m, const double* wall_time) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld %.9g %.9g %.9g %.9g", static_cast<long long>(m.iter), m.d_loss,
                m.g_loss, m.lr_g, m.lr_d);
  std::string line = buf;
  if (wall_time) {
    std::snprintf(buf, sizeof buf, " %.3f", *wall_time);
    line += buf;
  }
  return line;
}

TrainingResult run_training(const ExperimentConfig& cfg, std::ostream* progress) {
  cfg.validate();
  const Dataset data = load_dataset(cfg.data);
  Trainer trainer(cfg, data);

  const fs::path out = cfg.out_dir;
  const fs::path ckpt_dir = out / "checkpoints";
  const fs::path sample_dir = out / "samples";
  fs::create_directories(ckpt_dir);
  fs::create_directories(sample_dir);
  {
    std::ofstream snap(out / "config.txt");
    snap << "# " << version_stamp() << "\n" << cfg.to_text();
    if (!snap) throw std::runtime_error("cannot write " + (out / "config.txt").string());
  }

  const fs::path latest = ckpt_dir / "latest.bin";
  const fs::path log_path = out / "metrics.log";
  std::vector<std::string> kept;
  if (cfg.train.resume && fs::exists(latest)) {
    trainer.restore(load_checkpoint(latest));
    std::ifstream old(log_path);
    std::string line;
    while (std::getline(old, line)) {
      if (line.empty()) continue;
      if (line[0] == '#' || std::stoll(line) <= trainer.iteration()) kept.push_back(line);
    }
    if (progress) *progress << "resumed from iteration " << trainer.iteration() << "\n";
  }
  std::ofstream log(log_path, std::ios::trunc);
  if (kept.empty()) {
    log << "# iter d_loss g_loss lr_g lr_d" << (cfg.train.log_wall_time ? " wall_time" : "") << "\n";
  }
  for (const auto& l : kept) log << l << "\n";

  auto save = [&](std::int64_t iter) {
    const Checkpoint c = trainer.checkpoint();
    save_checkpoint(latest, c);
    if (cfg.train.checkpoint_every > 0 && iter % cfg.train.checkpoint_every == 0) {
      save_checkpoint(ckpt_dir / ("ckpt_" + pad_iter(iter) + ".bin"), c);
    }
  };
  auto write_samples = [&](std::int64_t iter) {
    const int n = 64;
    Tensor<float> imgs = trainer.sample(n, cfg.seed + 12345);
    write_png(sample_dir / ("iter_" + pad_iter(iter) + ".png"), make_grid(tensor_to_images(imgs), 8));
  };

  const auto start = std::chrono::steady_clock::now();
  TrainingResult result;
  result.out_dir = out;
  while (trainer.iteration() < cfg.train.total_iters) {
    result.last = trainer.step();
    const std::int64_t it = result.last.iter;
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << format_metrics_line(result.last, cfg.train.log_wall_time ? &wall : nullptr) << "\n";
    if (!log) throw std::runtime_error("cannot append to " + log_path.string() + " (disk full?)");
    if (cfg.train.sample_every > 0 && it % cfg.train.sample_every == 0) write_samples(it);
    if (cfg.train.checkpoint_every > 0 && it % cfg.train.checkpoint_every == 0) save(it);
    if (progress && (it % 100 == 0 || it == cfg.train.total_iters)) {
      *progress << "iter " << it << "  d_loss " << result.last.d_loss << "  g_loss "
                << result.last.g_loss << "\n";
    }
  }
  log.flush();
  if (trainer.iteration() > 0) {
    save(trainer.iteration());
    write_samples(trainer.iteration());
  }
  result.iterations = trainer.iteration();
  return result;
}

}  // namespace spn
