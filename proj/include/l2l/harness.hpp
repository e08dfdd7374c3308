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

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "l2l/config.hpp"
#include "l2l/cost_model.hpp"
#include "l2l/executors.hpp"

namespace l2l {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification failure or simulated OOM
inline constexpr int kExitUsage = 2;

struct RunOutcome {
  std::string status = "ok";  // ok | oom | error
  std::string message;
  std::uint64_t peak_bytes = 0;
  std::uint64_t h2d_bytes = 0;
  std::uint64_t d2h_bytes = 0;
  std::optional<RunReport> report;
};

// Runs one configuration with synthetic teacher data. Simulated OOM and
// engine errors are captured in the outcome rather than thrown.
RunOutcome execute_config(const RunConfig& config);

// run_id,schedule,N,H,I,ub,u,stash,precision,peak_bytes,transferred_h2d,
// transferred_d2h,status
std::string runs_csv_header();
std::string runs_csv_row(const std::string& run_id, const RunConfig& config,
                         const RunOutcome& outcome);
std::string loss_csv(const std::vector<double>& loss_trace);

// Modeled throughput for a config: cost-model parameters derived from the
// model shape, the device precision and the config's B and F.
CostParams cost_params_for(const RunConfig& config);

int cmd_run(const RunConfig& config, const std::filesystem::path& out_dir,
            std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepSpec& sweep, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err);
int cmd_costmodel(const CostParams& params, std::optional<double> min_u_target,
                  const std::filesystem::path& out_dir, std::ostream& out,
                  std::ostream& err);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerificationSuite {
  std::string name;
  std::function<SuiteResult()> run;
};

std::vector<VerificationSuite> verification_suites();
int cmd_verify(std::ostream& out);

}  // namespace l2l
