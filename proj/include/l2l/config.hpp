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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "l2l/eps.hpp"
#include "l2l/executors.hpp"

namespace l2l {

// One training run. Defaults apply to every key a config file omits.
struct RunConfig {
  Schedule schedule = Schedule::l2l(StashPlacement::Host);
  std::size_t n_layers = 4;
  std::size_t hidden = 64;
  std::size_t intermediate = 256;
  std::size_t ub = 4;
  std::size_t u = 2;
  std::size_t k = 1;
  PrecisionPolicy precision = PrecisionPolicy::fp32();
  OptimizerConfig optimizer = OptimizerConfig::sgd(0.01);
  std::uint64_t seed = 1;
  std::size_t steps = 10;
  std::optional<std::uint64_t> device_budget;
  // Cost-model inputs used for modeled throughput.
  double bandwidth_gbps = 12.0;
  double flops_tflops = 15.0;

  ModelSpec model() const;
  BatchPlan plan() const { return {ub, u, k}; }
  // Throws ConfigError on violated invariants.
  void validate() const;
};

// Applies one key=value assignment. Throws ConfigError for unknown keys or
// unparsable values; `line` is only used in messages (0 = no line).
void apply_config_value(RunConfig& config, std::string_view key,
                        std::string_view value, std::size_t line = 0);

// key=value per line, '#' starts a comment, blank lines ignored. Optional
// key "mb" must equal u * ub.
RunConfig parse_config(std::string_view text);

inline constexpr std::size_t kMaxSweepRuns = 10000;

// Base config plus axes, written as "sweep.<key>=v1,v2,..." lines. Axes are
// iterated in file order, first axis outermost.
struct SweepSpec {
  RunConfig base;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;

  std::size_t run_count() const;
  std::vector<RunConfig> expand() const;
};

SweepSpec parse_sweep(std::string_view text);

std::string read_text_file(const std::string& path);

}  // namespace l2l
