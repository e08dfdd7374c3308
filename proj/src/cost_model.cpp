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

#include "l2l/cost_model.hpp"

#include <cmath>
#include <cstdio>

#include "l2l/error.hpp"

namespace l2l {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string("cost model parameter ") + name +
                      " must be positive and finite, got " + fmt(v));
  }
}

}  // namespace

CostParams CostParams::from_times(double transfer_ms, double compute_ms,
                                  double ub, double n_layers,
                                  std::uint64_t u) {
  CostParams p;
  p.flops_tflops = 1.0;
  p.bandwidth_gbps = 1.0;
  p.layer_mb = transfer_ms;
  p.gops = compute_ms;
  p.ub = ub;
  p.n_layers = n_layers;
  p.u = u;
  return p;
}

void CostParams::validate() const {
  require_positive(flops_tflops, "F");
  require_positive(ub, "ub");
  require_positive(n_layers, "N");
  require_positive(bandwidth_gbps, "B");
  require_positive(gops, "c");
  if (!(layer_mb >= 0.0) || !std::isfinite(layer_mb)) {
    throw DomainError("cost model parameter L must be non-negative, got " +
                      fmt(layer_mb));
  }
  if (u < 1) throw DomainError("cost model parameter u must be >= 1");
}

double overhead_fraction(double transfer_ms, double compute_ms,
                         std::uint64_t u) {
  const double transfer = kTransfersPerVisit * transfer_ms;
  return transfer /
         (kComputeUnitsPerVisit * static_cast<double>(u) * compute_ms + transfer);
}

CostReport eval_innerloop(const CostParams& p) {
  p.validate();
  const double u = static_cast<double>(p.u);
  CostReport r;
  r.transfer_ms = p.layer_mb / p.bandwidth_gbps;
  r.compute_ms = p.gops / p.flops_tflops;
  const double visit =
      kComputeUnitsPerVisit * u * r.compute_ms + kTransfersPerVisit * r.transfer_ms;
  r.total_ms = p.n_layers * visit;
  r.t_forward = 1000.0 * u * p.ub / (p.n_layers * (r.compute_ms + r.transfer_ms));
  r.t_training = 1000.0 * u * p.ub / visit;
  r.overhead_fraction = overhead_fraction(r.transfer_ms, r.compute_ms, p.u);
  return r;
}

CostReport eval_no_innerloop(const CostParams& p) {
  if (p.u != 1) {
    throw DomainError("eval_no_innerloop expects u = 1, got " +
                      std::to_string(p.u));
  }
  p.validate();
  CostReport r;
  r.transfer_ms = p.layer_mb / p.bandwidth_gbps;
  r.compute_ms = p.gops / p.flops_tflops;
  const double visit = 4.0 * r.compute_ms + 2.0 * r.transfer_ms;
  r.total_ms = p.n_layers * visit;
  r.t_forward = 1000.0 * p.ub / (p.n_layers * (r.compute_ms + r.transfer_ms));
  r.t_training = 1000.0 * p.ub / visit;
  r.overhead_fraction = 2.0 * r.transfer_ms / visit;
  return r;
}

std::uint64_t min_u_for_overhead(const CostParams& p, double target) {
  if (!(target > 0.0 && target < 1.0)) {
    throw DomainError("overhead target must lie in (0, 1), got " + fmt(target));
  }
  p.validate();
  const double x = p.layer_mb / p.bandwidth_gbps;
  const double c = p.gops / p.flops_tflops;
  // Closed form, then nudged to absorb floating-point error at the boundary.
  const double raw = std::ceil(x * (1.0 - target) / (2.0 * c * target));
  std::uint64_t u = raw < 1.0 ? 1 : static_cast<std::uint64_t>(raw);
  while (u > 1 && overhead_fraction(x, c, u - 1) <= target) --u;
  while (overhead_fraction(x, c, u) > target) ++u;
  return u;
}

L2lpProjection l2lp_projection(const CostParams& p, double reduce_update_ms) {
  if (!(reduce_update_ms >= 0.0)) {
    throw DomainError("reduce/update time must be non-negative");
  }
  const CostReport base = eval_innerloop(p);
  L2lpProjection out;
  out.reduce_update_ms = p.n_layers * reduce_update_ms;
  out.exposed_ms = std::min(2.0, p.n_layers) * reduce_update_ms;
  out.hidden_fraction = p.n_layers <= 2.0 ? 0.0 : 1.0 - 2.0 / p.n_layers;
  out.innerloop_total_ms = base.total_ms;
  return out;
}

CostParams params_from_model(const ModelSpec& model, Precision precision,
                             double bandwidth_gbps, double flops_tflops,
                             std::size_t ub, std::uint64_t u) {
  model.validate();
  const LayerSpec& layer = model.layers.front();
  std::uint64_t macs_per_sample = 0;
  switch (layer.kind) {
    case LayerKind::EncoderBlock:
      macs_per_sample = std::uint64_t{layer.in} * layer.intermediate +
                        std::uint64_t{layer.intermediate} * layer.out;
      break;
    case LayerKind::Affine:
      macs_per_sample = std::uint64_t{layer.in} * layer.out;
      break;
    case LayerKind::LossHead:
      break;
  }
  CostParams p;
  p.flops_tflops = flops_tflops;
  p.bandwidth_gbps = bandwidth_gbps;
  p.n_layers = static_cast<double>(model.depth());
  p.ub = static_cast<double>(ub);
  p.u = u;
  p.layer_mb = static_cast<double>(layer.param_count() *
                                   bytes_per_element(precision)) / 1e6;
  p.gops = 2.0 * static_cast<double>(ub) * static_cast<double>(macs_per_sample) / 1e9;
  return p;
}

std::string cost_csv_header() {
  return "N,L_MB,B_GBps,c_Gops,F_TFLOPs,ub,u,X_ms,C_ms,total_ms,t_fwd,t_train,"
         "overhead";
}

std::string cost_csv_row(const CostParams& p, const CostReport& r) {
  return fmt(p.n_layers) + ',' + fmt(p.layer_mb) + ',' + fmt(p.bandwidth_gbps) +
         ',' + fmt(p.gops) + ',' + fmt(p.flops_tflops) + ',' + fmt(p.ub) + ',' +
         std::to_string(p.u) + ',' + fmt(r.transfer_ms) + ',' +
         fmt(r.compute_ms) + ',' + fmt(r.total_ms) + ',' + fmt(r.t_forward) +
         ',' + fmt(r.t_training) + ',' + fmt(r.overhead_fraction);
}

std::string format_cost_report(const CostParams& p, const CostReport& r) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "  layers N            %12.6g\n"
                "  layer size L        %12.6g MB\n"
                "  bandwidth B         %12.6g GB/s\n"
                "  forward ops c       %12.6g Gop\n"
                "  compute rate F      %12.6g TFLOP/s\n"
                "  microbatch ub       %12.6g\n"
                "  microbatches u      %12llu\n"
                "  transfer X          %12.6g ms\n"
                "  compute C           %12.6g ms\n"
                "  total               %12.6g ms\n"
                "  forward throughput  %12.6g samples/s\n"
                "  training throughput %12.6g samples/s\n"
                "  transfer overhead   %11.2f %%\n",
                p.n_layers, p.layer_mb, p.bandwidth_gbps, p.gops, p.flops_tflops,
                p.ub, static_cast<unsigned long long>(p.u), r.transfer_ms,
                r.compute_ms, r.total_ms, r.t_forward, r.t_training,
                100.0 * r.overhead_fraction);
  return buf;
}

}  // namespace l2l
