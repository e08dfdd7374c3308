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
#include <string>

#include "l2l/layers.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

// Analytic throughput model of layer relay with inner looping.
//
//   X = L / B          transfer time of one layer, ms (MB over GB/s)
//   C = c / F          forward compute of one layer on ub samples, ms
//                      (giga-ops over TFLOP/s)
//
// A backward pass costs twice a forward pass and the backward phase also
// recomputes the forward, so one layer visit costs u*C forward plus 3*u*C
// backward, together with one weight transfer per direction:
//
//   total  = N * (4 u C + 2 X)
//   T_fwd  = 1000 u ub / (N (C + X))
//   T_train = 1000 u ub / (4 u C + 2 X)
//   overhead = 2 X / (4 u C + 2 X)
struct CostParams {
  double flops_tflops = 1.0;   // F
  double ub = 1.0;             // microbatch size, samples
  double n_layers = 1.0;       // N
  double layer_mb = 1.0;       // L
  double bandwidth_gbps = 1.0; // B
  double gops = 1.0;           // c, per layer forward on ub samples
  std::uint64_t u = 1;

  // Parameters with the given per-layer times: L = X ms at B = 1 GB/s and
  // c = C ms at F = 1 TFLOP/s.
  static CostParams from_times(double transfer_ms, double compute_ms,
                               double ub, double n_layers, std::uint64_t u);

  // Throws DomainError naming the first offending field. L may be zero (the
  // transfer-free limit); everything else must be strictly positive.
  void validate() const;
};

// Forward, recompute and backward weights of C per layer visit.
inline constexpr double kComputeUnitsPerVisit = 4.0;
// One weight fetch for forward, one for backward.
inline constexpr double kTransfersPerVisit = 2.0;

struct CostReport {
  double transfer_ms = 0.0;  // X
  double compute_ms = 0.0;   // C
  double total_ms = 0.0;
  double t_forward = 0.0;    // samples/s
  double t_training = 0.0;   // samples/s
  double overhead_fraction = 0.0;
};

// Single microbatch per layer visit; requires p.u == 1.
CostReport eval_no_innerloop(const CostParams& p);
CostReport eval_innerloop(const CostParams& p);

double overhead_fraction(double transfer_ms, double compute_ms, std::uint64_t u);

// Smallest u >= 1 with overhead(u) <= target. Target must lie in (0, 1).
std::uint64_t min_u_for_overhead(const CostParams& p, double target);

struct L2lpProjection {
  double exposed_ms = 0.0;         // reduce/update left on the critical path
  double hidden_fraction = 0.0;    // share of reduce/update overlapped with compute
  double reduce_update_ms = 0.0;   // N * r, before overlap
  double innerloop_total_ms = 0.0; // total_ms of eval_innerloop(p)
};

// Overlapping the EPS reduce and update with device compute leaves only the
// last two layers' reduce/update exposed.
L2lpProjection l2lp_projection(const CostParams& p, double reduce_update_ms);

// L from the layer's parameter bytes, c from its multiply-add count:
// 2 * ub * (H*I + I*H) ops for an encoder block.
CostParams params_from_model(const ModelSpec& model, Precision precision,
                             double bandwidth_gbps, double flops_tflops,
                             std::size_t ub, std::uint64_t u);

std::string cost_csv_header();
std::string cost_csv_row(const CostParams& p, const CostReport& r);
std::string format_cost_report(const CostParams& p, const CostReport& r);

}  // namespace l2l
