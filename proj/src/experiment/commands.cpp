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

#include "spn/experiment/commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <future>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include "spn/core/gradcheck.hpp"

namespace spn::commands {
namespace {

namespace fs = std::filesystem;

fs::path default_checkpoint(const ExperimentConfig& cfg, const std::string& explicit_path) {
  return explicit_path.empty() ? fs::path(cfg.out_dir) / "checkpoints" / "latest.bin"
                               : fs::path(explicit_path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

int configured_num_classes(const ExperimentConfig& cfg) {
  if (!cfg.conditional()) return 0;
  if (cfg.data.kind == "shapes") return 3;
  if (cfg.data.kind == "cifar10") return 10;
  if (cfg.data.kind == "cifar100") return 100;
  int n = 0;
  const fs::path dir = resolve_data_path(cfg.data.path);
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_directory() ? 1 : 0;
  return n;
}

TrainingResult train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  log << version_stamp() << "\ntraining into " << cfg.out_dir << "\n";
  TrainingResult r = run_training(cfg, &log);
  log << "done: " << r.iterations << " iterations\n";
  return r;
}

EvalResult eval(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path ckpt = default_checkpoint(cfg, cfg.eval.checkpoint);
  LoadedGenerator g = load_generator(ckpt);
  const Checkpoint meta = load_checkpoint(ckpt);
  const std::string iter = meta.get_text("train.iteration");
  std::unique_ptr<FeatureExtractor> ex = make_extractor(cfg.eval.extractor);
  const Dataset real = load_dataset(cfg.data);
  const EvalResult r =
      evaluate_model(*g.gen, g.num_classes, *ex, real, cfg.eval.samples, cfg.eval.seed, cfg.eval.batch);
  fs::create_directories(cfg.out_dir);
  std::ostringstream kv;
  kv << std::setprecision(10) << "checkpoint=" << ckpt.string() << "\niteration=" << iter
     << "\nextractor=" << cfg.eval.extractor << "\nsamples=" << r.samples
     << "\nreal_samples=" << r.real_samples << "\nfid=" << r.fid << "\nis_mean=" << r.is_mean
     << "\nis_std=" << r.is_std << "\n";
  write_text(fs::path(cfg.out_dir) / "eval.txt", kv.str());
  std::ofstream(fs::path(cfg.out_dir) / "eval.log", std::ios::app)
      << iter << " " << r.fid << " " << r.is_mean << " " << r.is_std << "\n";
  log << kv.str();
  return r;
}

bool gradcheck(const Shape& shape, std::uint64_t seed, std::ostream& log) {
  bool ok = true;
  for (const auto& report : gradcheck::run_suite(shape, seed)) {
    log << gradcheck::format(report) << "\n";
    ok = ok && report.passed();
  }
  log << (ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return ok;
}

Audit audit(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const GeneratorSpec spec = cfg.generator_spec(configured_num_classes(cfg));
  const Audit a = audit_generator(spec);
  const std::string table = format_audit(a);
  const std::string layers = layer_table([&] {
    GeneratorSpec s = spec;
    s.norm = is_conditional(spec.norm) ? NormKind::kConditionalSpn : NormKind::kSpn;
    return s;
  }());
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "audit.txt", table + "\n" + layers);
  write_text(fs::path(cfg.out_dir) / "audit.kv", audit_key_values(a));
  log << table;
  return a;
}

MaskVisualization masks(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path ckpt = default_checkpoint(cfg, cfg.masks.checkpoint);
  LoadedGenerator g = load_generator(ckpt);
  std::mt19937_64 rng(cfg.masks.seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  Tensor<float> z(Shape{cfg.masks.samples, 1, 1, g.gen->spec().z_dim});
  for (float& v : z.values()) v = nd(rng);
  std::vector<int> cls;
  for (int i = 0; g.num_classes > 0 && i < cfg.masks.samples; ++i) cls.push_back(i % g.num_classes);
  MaskVisualization mv = visualize_masks(*g.gen, z, cls, cfg.masks.layer, cfg.masks.channels);
  const fs::path dir = fs::path(cfg.out_dir) / "masks";
  fs::create_directories(dir);
  const int n_layers = static_cast<int>(g.gen->spn_layers().size());
  const int layer = cfg.masks.layer < 0 ? n_layers + cfg.masks.layer : cfg.masks.layer;
  const fs::path png = dir / ("layer" + std::to_string(layer) + ".png");
  write_png(png, mv.grid);
  std::ostringstream kv;
  kv << "checkpoint=" << ckpt.string() << "\nlayer=" << layer << "\nsamples=" << cfg.masks.samples
     << "\nspatial_variance=" << mask_spatial_variance(mv.mask) << "\ngrid=" << png.string() << "\n";
  write_text(dir / "masks.kv", kv.str());
  log << kv.str();
  return mv;
}

std::vector<VariantOutcome> ablate(const KeyValues& kv, std::ostream& log) {
  const std::vector<SweepVariant> variants = expand_sweep(kv);
  const ExperimentConfig base = ExperimentConfig::from_key_values(kv);
  std::vector<ExperimentConfig> cfgs;
  std::string problems;
  for (const auto& v : variants) {
    try {
      ExperimentConfig c = ExperimentConfig::from_key_values(v.values);
      c.out_dir = (fs::path(base.out_dir) / v.name).string();
      c.validate();
      cfgs.push_back(std::move(c));
    } catch (const ConfigError& e) {
      problems += "\nvariant " + v.name + ": " + e.what();
    }
  }
  if (!problems.empty()) throw ConfigError("invalid sweep:" + problems);

  std::vector<VariantOutcome> outcomes(cfgs.size());
  std::mutex log_mutex;
  auto run_one = [&](std::size_t i) {
    VariantOutcome& o = outcomes[i];
    o.name = variants[i].name;
    o.out_dir = cfgs[i].out_dir;
    try {
      const TrainingResult r = run_training(cfgs[i], nullptr);
      o.iterations = r.iterations;
      o.d_loss = r.last.d_loss;
      o.g_loss = r.last.g_loss;
      o.finite = std::isfinite(o.d_loss) && std::isfinite(o.g_loss);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    std::lock_guard<std::mutex> lock(log_mutex);
    log << o.name << ": " << (o.error.empty() ? "ok" : "FAILED " + o.error) << " (" << o.iterations
        << " iterations, d_loss " << o.d_loss << ", g_loss " << o.g_loss << ")\n";
  };
  const auto parallel = static_cast<std::size_t>(std::max(1, base.ablate_parallel));
  for (std::size_t start = 0; start < cfgs.size(); start += parallel) {
    std::vector<std::future<void>> jobs;
    for (std::size_t i = start; i < std::min(cfgs.size(), start + parallel); ++i) {
      jobs.push_back(std::async(parallel == 1 ? std::launch::deferred : std::launch::async, run_one, i));
    }
    for (auto& j : jobs) j.get();
  }

  std::ostringstream tsv;
  tsv << "variant\titerations\td_loss\tg_loss\tfinite\terror\n";
  for (const auto& o : outcomes) {
    tsv << o.name << "\t" << o.iterations << "\t" << o.d_loss << "\t" << o.g_loss << "\t"
        << (o.finite ? "true" : "false") << "\t" << o.error << "\n";
  }
  fs::create_directories(base.out_dir);
  write_text(fs::path(base.out_dir) / "summary.tsv", tsv.str());
  return outcomes;
}

}  // namespace spn::commands
