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

#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "l2l/data.hpp"
#include "l2l/eps.hpp"
#include "l2l/memory_ledger.hpp"

namespace l2l {

enum class ScheduleKind { Conventional, BaselineAG, L2L };
enum class StashPlacement { Device, Host };

std::string_view to_string(ScheduleKind k);
std::string_view to_string(StashPlacement s);

// Training schedule:
//  - Conventional: whole model, all activations and all gradients on device,
//    one pass over the minibatch.
//  - BaselineAG: conventional passes over u microbatches, accumulating a
//    whole-model gradient buffer before one step.
//  - L2L: one layer on device at a time (plus one prefetched layer in the
//    transit buffer); every microbatch runs through a layer before the next
//    layer is fetched. Only layer-boundary activations are stashed; the
//    backward phase recomputes within-layer intermediates.
struct Schedule {
  ScheduleKind kind = ScheduleKind::L2L;
  StashPlacement stash = StashPlacement::Host;  // L2L only

  static Schedule conventional() { return {ScheduleKind::Conventional}; }
  static Schedule baseline_ag() { return {ScheduleKind::BaselineAG}; }
  static Schedule l2l(StashPlacement stash) { return {ScheduleKind::L2L, stash}; }
};

// Microbatch size ub, microbatch count u, worker count k. Each worker sees
// u * ub samples per step; a step consumes k * u * ub samples.
struct BatchPlan {
  std::size_t ub = 1;
  std::size_t u = 1;
  std::size_t k = 1;

  std::size_t minibatch() const { return u * ub; }
  std::size_t total_batch() const { return k * u * ub; }
  void validate() const;
};

struct RunOptions {
  std::size_t steps = 1;
  // Order in which workers execute each step; empty means 0..k-1.
  std::vector<std::size_t> worker_order;
};

struct RunReport {
  EpsSnapshot final_master;
  std::vector<double> loss_trace;  // mean minibatch loss per step
  MemoryReport memory;             // merged across workers
  std::vector<MemoryReport> worker_memory;
  std::vector<LayerParams> last_gradients;  // reduced gradient of the final step
  std::size_t steps = 0;
  double wall_seconds = 0.0;  // informational only
};

// Layer-boundary activations kept between forward and backward, keyed by
// (boundary, microbatch). Host placement parks entries in host memory: a
// device-to-host transfer on store and a host-to-device transfer on take.
// Device placement keeps the entry's device allocation alive until taken.
class ActivationStash {
 public:
  struct Entry {
    Tensor tensor;
    Allocation device;
  };

  ActivationStash(StashPlacement placement, std::size_t bytes_per_element)
      : placement_(placement), bytes_per_element_(bytes_per_element) {}

  // For device placement the stash takes ownership of `device_copy`; for host
  // placement the caller keeps it.
  void store(std::size_t boundary, std::size_t micro, const Tensor& t,
             const Allocation& device_copy, MemoryLedger& ledger);
  // Throws ConsistencyError if the entry is missing or was already consumed.
  Entry take(std::size_t boundary, std::size_t micro, MemoryLedger& ledger);

  StashPlacement placement() const { return placement_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  StashPlacement placement_;
  std::size_t bytes_per_element_;
  std::map<std::pair<std::size_t, std::size_t>, Entry> entries_;
};

// Runs `options.steps` optimizer steps of `schedule`. `ledgers` holds one
// ledger per worker (size plan.k); `eps.worker_count()` must equal plan.k.
RunReport execute(const Schedule& schedule, const DataSource& data,
                  const BatchPlan& plan, EpsStore& eps,
                  std::span<MemoryLedger> ledgers, const RunOptions& options);

RunReport run_conventional(const DataSource& data, const BatchPlan& plan,
                           EpsStore& eps, MemoryLedger& ledger,
                           std::size_t steps = 1);
RunReport run_baseline_ag(const DataSource& data, const BatchPlan& plan,
                          EpsStore& eps, MemoryLedger& ledger,
                          std::size_t steps = 1);
RunReport run_l2l(const DataSource& data, const BatchPlan& plan,
                  StashPlacement stash, EpsStore& eps, MemoryLedger& ledger,
                  std::size_t steps = 1);
RunReport run_data_parallel(const Schedule& schedule, const DataSource& data,
                            const BatchPlan& plan, EpsStore& eps,
                            std::vector<MemoryLedger>& ledgers,
                            const RunOptions& options);

// Minibatch loss as seen by the optimizer: mean over workers of the sum over
// microbatches of the 1/u-scaled per-microbatch MSE. Straight FP64 forward,
// no ledger, no relay; the reference for finite differences.
double reference_minibatch_loss(const ModelSpec& model,
                                const std::vector<LayerParams>& params,
                                const Minibatch& batch, const BatchPlan& plan);

struct GradcheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

inline constexpr double kGradcheckStep = 1e-4;
inline constexpr std::uint64_t kGradcheckMaxParams = 5000;

// Compares the schedule's reduced minibatch gradient (FP64 policy) with
// central finite differences of reference_minibatch_loss.
GradcheckResult gradcheck(const ModelSpec& model, const BatchPlan& plan,
                          const Schedule& schedule,
                          std::optional<std::vector<LayerParams>> params =
                              std::nullopt,
                          double step = kGradcheckStep);

inline constexpr double kGradcheckFloor = 1e-8;

// |a - b| / max(|a|, |b|, kGradcheckFloor).
double gradcheck_error(double analytic, double numeric);

}  // namespace l2l
