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

#include "spn/experiment/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef SPN_VERSION
#define SPN_VERSION "0.0.0"
#endif
#ifndef SPN_GIT_REV
#define SPN_GIT_REV "unknown"
#endif

namespace spn {
namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename I>
I parse_int(const std::string& s) {
  I v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  const std::string v = lower(s);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::invalid_argument("expected true/false, got '" + s + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Binding helpers: one line per key in the table below.
template <typename M>
Field int_field(std::string key, M member) {
  using V = std::remove_reference_t<decltype(std::invoke(member, std::declval<ExperimentConfig&>()))>;
  return {std::move(key),
          [member](ExperimentConfig& c, const std::string& s) {
            std::invoke(member, c) = parse_int<V>(s);
          },
          [member](const ExperimentConfig& c) {
            return std::to_string(std::invoke(member, const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename M>
Field double_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig& c, const std::string& s) { std::invoke(member, c) = parse_double(s); },
          [member](const ExperimentConfig& c) {
            return fmt_double(std::invoke(member, const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename M>
Field bool_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig& c, const std::string& s) { std::invoke(member, c) = parse_bool(s); },
          [member](const ExperimentConfig& c) {
            return fmt_bool(std::invoke(member, const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename M>
Field string_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig& c, const std::string& s) { std::invoke(member, c) = s; },
          [member](const ExperimentConfig& c) {
            return std::invoke(member, const_cast<ExperimentConfig&>(c));
          }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      string_field("out_dir", [](C& c) -> auto& { return c.out_dir; }),
      int_field("seed", [](C& c) -> auto& { return c.seed; }),

      string_field("data.kind", [](C& c) -> auto& { return c.data.kind; }),
      string_field("data.path", [](C& c) -> auto& { return c.data.path; }),
      int_field("data.size", [](C& c) -> auto& { return c.data.size; }),
      int_field("data.count", [](C& c) -> auto& { return c.data.count; }),
      int_field("data.shapes_seed", [](C& c) -> auto& { return c.data.shapes_seed; }),
      bool_field("data.train_split", [](C& c) -> auto& { return c.data.train_split; }),
      bool_field("data.flip", [](C& c) -> auto& { return c.data.flip; }),

      int_field("model.resolution", [](C& c) -> auto& { return c.model.resolution; }),
      {"model.norm", [](C& c, const std::string& s) { c.model.norm = parse_norm_kind(s); },
       [](const C& c) { return to_string(c.model.norm); }},
      int_field("model.g_width", [](C& c) -> auto& { return c.model.g_width; }),
      int_field("model.d_width", [](C& c) -> auto& { return c.model.d_width; }),
      int_field("model.z_dim", [](C& c) -> auto& { return c.model.z_dim; }),
      string_field("model.g_spectral", [](C& c) -> auto& { return c.model.g_spectral; }),
      bool_field("model.attention", [](C& c) -> auto& { return c.model.attention; }),

      int_field("spn.kernel_size", [](C& c) -> auto& { return c.model.spn.kernel_size; }),
      {"spn.mask",
       [](C& c, const std::string& s) {
         const std::string v = lower(s);
         if (v == "channel") {
           c.model.spn.mask_channels = MaskChannels::kPerChannel;
         } else if (v == "single") {
           c.model.spn.mask_channels = MaskChannels::kSingle;
         } else {
           throw std::invalid_argument("expected channel or single, got '" + s + "'");
         }
       },
       [](const C& c) {
         return std::string(c.model.spn.mask_channels == MaskChannels::kSingle ? "single" : "channel");
       }},
      {"spn.affine_conv",
       [](C& c, const std::string& s) {
         const std::string v = lower(s);
         if (v == "depthwise") {
           c.model.spn.affine_conv = AffineConv::kDepthwise;
         } else if (v == "standard") {
           c.model.spn.affine_conv = AffineConv::kStandard;
         } else {
           throw std::invalid_argument("expected depthwise or standard, got '" + s + "'");
         }
       },
       [](const C& c) {
         return std::string(c.model.spn.affine_conv == AffineConv::kStandard ? "standard" : "depthwise");
       }},
      bool_field("spn.affine_bias", [](C& c) -> auto& { return c.model.spn.affine_bias; }),
      bool_field("spn.latent_bias", [](C& c) -> auto& { return c.model.spn.latent_bias; }),
      bool_field("spn.per_class_kernels", [](C& c) -> auto& { return c.model.spn.per_class_kernels; }),
      int_field("spn.embed_dim", [](C& c) -> auto& { return c.model.spn.embed_dim; }),

      {"train.loss", [](C& c, const std::string& s) { c.train.loss = parse_loss_kind(s); },
       [](const C& c) { return to_string(c.train.loss); }},
      double_field("train.lr_g", [](C& c) -> auto& { return c.train.lr_g; }),
      double_field("train.lr_d", [](C& c) -> auto& { return c.train.lr_d; }),
      double_field("train.beta1", [](C& c) -> auto& { return c.train.adam.beta1; }),
      double_field("train.beta2", [](C& c) -> auto& { return c.train.adam.beta2; }),
      int_field("train.n_dis", [](C& c) -> auto& { return c.train.n_dis; }),
      int_field("train.batch_d", [](C& c) -> auto& { return c.train.batch_d; }),
      int_field("train.batch_g", [](C& c) -> auto& { return c.train.batch_g; }),
      int_field("train.iters", [](C& c) -> auto& { return c.train.total_iters; }),
      int_field("train.decay_iters", [](C& c) -> auto& { return c.train.decay_last_iters; }),
      int_field("train.checkpoint_every", [](C& c) -> auto& { return c.train.checkpoint_every; }),
      int_field("train.sample_every", [](C& c) -> auto& { return c.train.sample_every; }),
      bool_field("train.log_wall_time", [](C& c) -> auto& { return c.train.log_wall_time; }),
      bool_field("train.resume", [](C& c) -> auto& { return c.train.resume; }),

      string_field("eval.checkpoint", [](C& c) -> auto& { return c.eval.checkpoint; }),
      string_field("eval.extractor", [](C& c) -> auto& { return c.eval.extractor; }),
      int_field("eval.samples", [](C& c) -> auto& { return c.eval.samples; }),
      int_field("eval.batch", [](C& c) -> auto& { return c.eval.batch; }),
      int_field("eval.seed", [](C& c) -> auto& { return c.eval.seed; }),

      string_field("masks.checkpoint", [](C& c) -> auto& { return c.masks.checkpoint; }),
      int_field("masks.layer", [](C& c) -> auto& { return c.masks.layer; }),
      {"masks.channels",
       [](C& c, const std::string& s) {
         c.masks.channels.clear();
         for (const auto& item : split(s, ',')) c.masks.channels.push_back(parse_int<int>(item));
       },
       [](const C& c) {
         std::string out;
         for (int ch : c.masks.channels) out += (out.empty() ? "" : ",") + std::to_string(ch);
         return out;
       }},
      int_field("masks.samples", [](C& c) -> auto& { return c.masks.samples; }),
      int_field("masks.seed", [](C& c) -> auto& { return c.masks.seed; }),

      int_field("ablate.parallel", [](C& c) -> auto& { return c.ablate_parallel; }),
  };
  return table;
}

void parse_into(KeyValues& kv, const std::string& text, const fs::path& base_dir, int depth) {
  if (depth > 16) throw ConfigError("include depth exceeds 16 (cycle?)");
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> problems;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      problems.push_back("line " + std::to_string(lineno) + ": empty key");
    } else if (key == "include") {
      fs::path inc = value;
      if (inc.is_relative()) inc = base_dir / inc;
      std::ifstream f(inc);
      if (!f) {
        problems.push_back("line " + std::to_string(lineno) + ": cannot read include " + inc.string());
        continue;
      }
      std::stringstream ss;
      ss << f.rdbuf();
      parse_into(kv, ss.str(), inc.parent_path(), depth + 1);
    } else {
      kv.set(key, value);
    }
  }
  if (!problems.empty()) {
    std::string msg = "config syntax errors:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

}  // namespace

std::optional<std::string> KeyValues::get(const std::string& key) const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->first == key) return it->second;
  }
  return std::nullopt;
}

KeyValues KeyValues::resolved() const {
  KeyValues out;
  std::set<std::string> seen;
  for (const auto& [k, v] : entries) {
    if (seen.insert(k).second) out.set(k, *get(k));
  }
  return out;
}

KeyValues parse_key_values(const std::string& text, const fs::path& base_dir) {
  KeyValues kv;
  parse_into(kv, text, base_dir, 0);
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_key_values(ss.str(), path.parent_path());
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  for (const auto& [key, value] : kv.resolved().entries) {
    if (key.rfind("sweep.", 0) == 0) continue;
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) {
      problems.push_back("unknown key '" + key + "'");
      continue;
    }
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      problems.push_back(key + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> p;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) p.push_back(what);
  };
  need(!out_dir.empty(), "out_dir must not be empty");
  need(ablate_parallel >= 1, "ablate.parallel must be >= 1");

  const std::set<std::string> kinds{"shapes", "cifar10", "cifar100", "folder"};
  need(kinds.count(data.kind) > 0, "data.kind must be shapes, cifar10, cifar100 or folder");
  need(data.kind == "shapes" || !data.path.empty(), "data.path is required for data.kind=" + data.kind);
  need(data.count >= 1, "data.count must be >= 1");
  need(data.size == model.resolution,
       "data.size (" + std::to_string(data.size) + ") must equal model.resolution (" +
           std::to_string(model.resolution) + ")");
  need(!(data.kind == "cifar10" || data.kind == "cifar100") || data.size == 32,
       "CIFAR images are 32x32");

  need(model.resolution == 32 || model.resolution == 128, "model.resolution must be 32 or 128");
  need(model.g_width >= 0 && model.d_width >= 0, "model widths must be >= 0");
  need(model.z_dim >= 1, "model.z_dim must be >= 1");
  need(model.g_spectral == "auto" || model.g_spectral == "true" || model.g_spectral == "false",
       "model.g_spectral must be auto, true or false");
  need(model.spn.kernel_size >= 1 && model.spn.kernel_size % 2 == 1, "spn.kernel_size must be odd");
  need(model.spn.embed_dim >= 1, "spn.embed_dim must be >= 1");
  need(!model.spn.per_class_kernels || model.norm == NormKind::kConditionalSpn,
       "spn.per_class_kernels requires model.norm=cspn");

  need(train.lr_g >= 0 && train.lr_d >= 0, "learning rates must be >= 0");
  need(train.adam.beta1 >= 0 && train.adam.beta1 < 1, "train.beta1 must lie in [0, 1)");
  need(train.adam.beta2 >= 0 && train.adam.beta2 < 1, "train.beta2 must lie in [0, 1)");
  need(train.n_dis >= 1, "train.n_dis must be >= 1");
  need(train.batch_d >= 1 && train.batch_g >= 1, "batch sizes must be >= 1");
  need(train.total_iters >= 0, "train.iters must be >= 0");
  need(train.decay_last_iters >= 0 && train.decay_last_iters <= train.total_iters,
       "train.decay_iters must lie in [0, train.iters]");
  need(train.checkpoint_every >= 0 && train.sample_every >= 0, "cadences must be >= 0");
  need(data.kind != "shapes" || train.batch_d <= data.count, "train.batch_d exceeds data.count");

  need(eval.samples >= 1 && eval.batch >= 1, "eval.samples and eval.batch must be >= 1");
  need(masks.samples >= 1, "masks.samples must be >= 1");
  need(!masks.channels.empty(), "masks.channels must list at least one channel");
  for (int ch : masks.channels) need(ch >= 0, "masks.channels must be >= 0");

  if (p.empty()) {
    // Architecture constraints, with a placeholder class count.
    try {
      generator_spec(conditional() ? 1 : 0).validate();
      discriminator_spec(conditional() ? 1 : 0).validate();
    } catch (const std::invalid_argument& e) {
      p.push_back(e.what());
    }
  }
  if (!p.empty()) {
    std::string msg = "invalid config:";
    for (const auto& s : p) msg += "\n  " + s;
    throw ConfigError(msg);
  }
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

GeneratorSpec ExperimentConfig::generator_spec(int num_classes) const {
  GeneratorSpec g = model.resolution == 128 ? GeneratorSpec::gen128(model.norm, num_classes)
                                            : GeneratorSpec::gen32(model.norm, num_classes);
  if (model.g_width > 0) g = g.with_width(model.g_width);
  g.z_dim = model.z_dim;
  g.attention = model.attention;
  if (model.g_spectral != "auto") g.spectral = model.g_spectral == "true";
  g.spn = model.spn;
  g.seed = seed * 2 + 1;
  return g;
}

DiscriminatorSpec ExperimentConfig::discriminator_spec(int num_classes) const {
  DiscriminatorSpec d = model.resolution == 128 ? DiscriminatorSpec::dis128(num_classes)
                                                : DiscriminatorSpec::dis32(num_classes);
  if (model.d_width > 0) d = d.with_width(model.d_width);
  d.seed = seed * 2 + 2;
  return d;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  ExperimentConfig cfg = ExperimentConfig::from_key_values(read_key_values(path));
  cfg.validate();
  return cfg;
}

std::vector<SweepVariant> expand_sweep(const KeyValues& kv) {
  KeyValues base;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [k, v] : kv.resolved().entries) {
    if (k.rfind("sweep.", 0) == 0) {
      auto values = split(v, ',');
      if (values.empty()) throw ConfigError("sweep key " + k + " has no values");
      axes.emplace_back(k.substr(6), std::move(values));
    } else {
      base.set(k, v);
    }
  }
  std::vector<SweepVariant> out{{"", base}};
  for (const auto& [key, values] : axes) {
    std::vector<SweepVariant> next;
    for (const auto& v : out) {
      for (const auto& value : values) {
        SweepVariant n = v;
        n.values.set(key, value);
        const std::string tag = key.substr(key.rfind('.') + 1) + "-" + value;
        n.name = n.name.empty() ? tag : n.name + "_" + tag;
        next.push_back(std::move(n));
      }
    }
    out = std::move(next);
  }
  if (axes.empty()) out[0].name = "base";
  return out;
}

fs::path resolve_data_path(const std::string& path) {
  fs::path p = path;
  if (p.is_relative()) {
    if (const char* root = std::getenv("SPN_DATA_ROOT"); root && *root) return fs::path(root) / p;
  }
  return p;
}

Dataset load_dataset(const DataConfig& cfg) {
  if (cfg.kind == "shapes") return make_shapes_dataset(cfg.count, cfg.size, cfg.shapes_seed);
  const fs::path path = resolve_data_path(cfg.path);
  if (cfg.kind == "cifar10") return load_cifar(path, CifarVariant::k10, cfg.train_split);
  if (cfg.kind == "cifar100") return load_cifar(path, CifarVariant::k100, cfg.train_split);
  if (cfg.kind == "folder") return load_image_folder(path, cfg.size);
  throw ConfigError("unknown data.kind " + cfg.kind);
}

std::string version_stamp() { return std::string("spn ") + SPN_VERSION + " (" + SPN_GIT_REV + ")"; }

}  // namespace spn
