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

// spn: train, evaluate, audit and inspect SPN GAN experiments.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime
// failure (missing data, numerical divergence, I/O).

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "spn/experiment/commands.hpp"

namespace {

using namespace spn;

// Reads the config file and applies --set overrides on top.
KeyValues gather(const std::string& path, const std::vector<std::string>& overrides) {
  KeyValues kv = path.empty() ? KeyValues{} : read_key_values(path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = ExperimentConfig::from_key_values(gather(path, overrides));
  cfg.validate();
  return cfg;
}

Shape parse_shape(const std::string& text) {
  std::vector<int> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) dims.push_back(std::stoi(item));
  if (dims.size() != 4) throw ConfigError("--shape expects B,H,W,C");
  for (int d : dims) {
    if (d < 1) throw ConfigError("--shape entries must be positive");
  }
  return Shape{dims[0], dims[1], dims[2], dims[3]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPN GAN experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spn::version_stamp());

  std::string config;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("config", config, "Experiment config file (key = value)");
    if (required) opt->required();
    opt->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "Override a config key (key=value), repeatable");
  };

  auto* train = app.add_subcommand("train", "Train a GAN from a config");
  add_config(train, true);
  auto* eval = app.add_subcommand("eval", "FID / IS of a checkpoint");
  add_config(eval, true);
  auto* audit = app.add_subcommand("audit", "Parameter and FLOP audit, BN versus SPN");
  add_config(audit, false);
  auto* masks = app.add_subcommand("masks", "Export self-latent mask grids");
  add_config(masks, true);
  auto* ablate = app.add_subcommand("ablate", "Run every variant of a sweep config");
  add_config(ablate, true);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every SPN op");
  std::string shape_text = "2,4,4,2";
  std::uint64_t seed = 0;
  grad->add_option("--shape", shape_text, "Input shape B,H,W,C")->capture_default_str();
  grad->add_option("--seed", seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      commands::train(config_from(config, overrides), std::cout);
    } else if (*eval) {
      commands::eval(config_from(config, overrides), std::cout);
    } else if (*audit) {
      commands::audit(config_from(config, overrides), std::cout);
    } else if (*masks) {
      commands::masks(config_from(config, overrides), std::cout);
    } else if (*ablate) {
      const auto outcomes = commands::ablate(gather(config, overrides), std::cout);
      for (const auto& o : outcomes) {
        if (!o.error.empty() || !o.finite) return 2;
      }
    } else if (*grad) {
      return commands::gradcheck(parse_shape(shape_text), seed, std::cout) ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
