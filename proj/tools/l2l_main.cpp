/* Copyright 2026 The L2L Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// l2l: layer-relay training simulator.
//
//   l2l run       --config FILE [--out DIR] [--seed N] [--budget BYTES]
//   l2l sweep     --config FILE [--out DIR] [--seed N] [--budget BYTES]
//   l2l costmodel (--N .. --L .. --B .. --c .. --F .. --ub .. --u .. | --config FILE)
//                 [--min-u FRACTION] [--out DIR]
//   l2l verify
//   l2l gradcheck [--config FILE] [--seed N]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "l2l/config.hpp"
#include "l2l/error.hpp"
#include "l2l/harness.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> budget;
};

void apply(l2l::RunConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.budget) c.device_budget = *o.budget;
}

l2l::RunConfig load_config(const std::string& path) {
  return path.empty() ? l2l::RunConfig{}
                      : l2l::parse_config(l2l::read_text_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-to-layer training simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  Overrides over;

  auto* run = app.add_subcommand("run", "execute one configuration");
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--seed", over.seed, "override seed");
  run->add_option("--budget", over.budget, "device budget in bytes");

  auto* sweep = app.add_subcommand("sweep", "execute a sweep");
  sweep->add_option("--config", config_path, "sweep file")->required();
  sweep->add_option("--out", out_dir, "output directory")->capture_default_str();
  sweep->add_option("--seed", over.seed, "override seed");
  sweep->add_option("--budget", over.budget, "device budget in bytes");

  l2l::CostParams cp;
  std::optional<double> min_u;
  auto* cost = app.add_subcommand("costmodel", "evaluate the throughput model");
  cost->add_option("--config", config_path, "derive parameters from a run config");
  cost->add_option("--N", cp.n_layers, "layers");
  cost->add_option("--L", cp.layer_mb, "layer size, MB");
  cost->add_option("--B", cp.bandwidth_gbps, "host-device bandwidth, GB/s");
  cost->add_option("--c", cp.gops, "forward giga-ops per layer per microbatch");
  cost->add_option("--F", cp.flops_tflops, "device TFLOP/s");
  cost->add_option("--ub", cp.ub, "microbatch size");
  cost->add_option("--u", cp.u, "microbatches per layer visit");
  cost->add_option("--min-u", min_u, "print the smallest u with overhead <= FRACTION");
  cost->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "run the verification suites");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  grad->add_option("--config", config_path, "key=value config file");
  grad->add_option("--seed", over.seed, "override seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? l2l::kExitOk : l2l::kExitUsage;
  }

  try {
    if (*run) {
      l2l::RunConfig c = load_config(config_path);
      apply(c, over);
      c.validate();
      return l2l::cmd_run(c, out_dir, std::cout, std::cerr);
    }
    if (*sweep) {
      l2l::SweepSpec s = l2l::parse_sweep(l2l::read_text_file(config_path));
      apply(s.base, over);
      return l2l::cmd_sweep(s, out_dir, std::cout, std::cerr);
    }
    if (*cost) {
      if (!config_path.empty()) {
        const l2l::RunConfig c = load_config(config_path);
        cp = l2l::cost_params_for(c);
      }
      return l2l::cmd_costmodel(cp, min_u, out_dir, std::cout, std::cerr);
    }
    if (*verify) return l2l::cmd_verify(std::cout);
    if (*grad) {
      l2l::RunConfig c;
      c.n_layers = 2;
      c.hidden = 4;
      c.intermediate = 8;
      c.ub = 2;
      c.u = 2;
      if (!config_path.empty()) c = load_config(config_path);
      apply(c, over);
      return l2l::cmd_gradcheck(c, std::cout);
    }
  } catch (const l2l::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return l2l::kExitUsage;
  } catch (const l2l::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return l2l::kExitUsage;
  } catch (const l2l::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return l2l::kExitUsage;
  } catch (const l2l::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return l2l::kExitFailure;
  }
  return l2l::kExitUsage;
}
