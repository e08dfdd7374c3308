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

#include "l2l/executors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "l2l/error.hpp"

namespace l2l {

namespace {

// A tensor together with the device bytes it occupies.
struct DeviceBuffer {
  Tensor tensor;
  Allocation alloc;
};

// Everything one worker needs to run its share of a step.
struct WorkerContext {
  const ModelSpec& model;
  EpsStore& eps;
  MemoryLedger& ledger;
  std::size_t worker;
  Tensor inputs;   // u * ub rows, device precision
  Tensor targets;  // u * ub rows, device precision
  const BatchPlan& plan;

  std::size_t bpe() const { return eps.policy().device_bytes_per_element(); }
  Allocation alloc(MemCategory c, std::uint64_t elements) {
    return ledger.alloc_bytes(c, elements * bpe());
  }
  // Within-layer intermediates; affine layers keep none.
  std::optional<Allocation> alloc_workspace(const LayerSpec& spec) {
    const std::uint64_t n = plan.ub * spec.residual_width();
    if (n == 0) return std::nullopt;
    return alloc(MemCategory::Workspace, n);
  }
  void release(const std::optional<Allocation>& a) {
    if (a) ledger.release(*a);
  }
  Tensor micro_input(std::size_t j) const {
    return slice_rows(inputs, j * plan.ub, plan.ub);
  }
  Tensor micro_target(std::size_t j) const {
    return slice_rows(targets, j * plan.ub, plan.ub);
  }
  double loss_scale() const { return 1.0 / static_cast<double>(plan.u); }
};

// L2L relay for one worker. Returns the sum of scaled microbatch losses.
double l2l_pass(WorkerContext& ctx, StashPlacement placement) {
  const std::size_t n = ctx.model.depth();
  const std::size_t u = ctx.plan.u;
  ActivationStash stash(placement, ctx.bpe());

  // Forward: the inner loop runs every microbatch through layer l before
  // layer l+1 is made resident.
  std::vector<DeviceBuffer> relay;
  relay.reserve(u);
  for (std::size_t j = 0; j < u; ++j) {
    Tensor x = ctx.micro_input(j);
    Allocation a = ctx.alloc(MemCategory::ActivationStash, x.size());
    relay.push_back({std::move(x), a});
  }

  std::optional<DeviceLayer> next = ctx.eps.fetch_layer(0, ctx.ledger);
  for (std::size_t l = 0; l < n; ++l) {
    DeviceLayer cur = std::move(*next);
    next.reset();
    cur.make_resident(ctx.ledger);
    if (l + 1 < n) next = ctx.eps.fetch_layer(l + 1, ctx.ledger);
    const LayerSpec& spec = ctx.model.layers[l];
    for (std::size_t j = 0; j < u; ++j) {
      DeviceBuffer x = std::move(relay[j]);
      stash.store(l, j, x.tensor, x.alloc, ctx.ledger);
      std::optional<Allocation> ws = ctx.alloc_workspace(spec);
      ForwardResult fr = layer_forward(spec, cur.params(), x.tensor);
      ctx.release(ws);
      Allocation ya = ctx.alloc(MemCategory::ActivationStash, fr.y.size());
      if (placement == StashPlacement::Host) ctx.ledger.release(x.alloc);
      relay[j] = {std::move(fr.y), ya};
    }
    cur.release(ctx.ledger);
  }

  // Loss head at the top of the stack.
  double loss = 0.0;
  std::vector<DeviceBuffer> cot;
  cot.reserve(u);
  for (std::size_t j = 0; j < u; ++j) {
    Tensor target = ctx.micro_target(j);
    Allocation ta = ctx.alloc(MemCategory::Workspace, target.size());
    LossResult lr = loss_head(relay[j].tensor, target, ctx.loss_scale());
    loss += lr.loss;
    Allocation ga = ctx.alloc(MemCategory::Gradients, lr.dpred.size());
    ctx.ledger.release(ta);
    ctx.ledger.release(relay[j].alloc);
    cot.push_back({std::move(lr.dpred), ga});
  }

  // Backward: weights are fetched again, intermediates recomputed from the
  // stashed boundary, and the layer gradient accumulates over microbatches on
  // device before a single push to the EPS.
  next = ctx.eps.fetch_layer(n - 1, ctx.ledger);
  for (std::size_t l = n; l-- > 0;) {
    DeviceLayer cur = std::move(*next);
    next.reset();
    cur.make_resident(ctx.ledger);
    if (l > 0) next = ctx.eps.fetch_layer(l - 1, ctx.ledger);
    const LayerSpec& spec = ctx.model.layers[l];
    const std::uint64_t p = spec.param_count();

    std::optional<LayerParams> acc;
    Allocation acc_alloc;
    for (std::size_t j = 0; j < u; ++j) {
      ActivationStash::Entry x = stash.take(l, j, ctx.ledger);
      std::optional<Allocation> ws = ctx.alloc_workspace(spec);
      ForwardResult fr = layer_forward(spec, cur.params(), x.tensor);
      BackwardResult br =
          layer_backward(spec, cur.params(), x.tensor, fr.residuals, cot[j].tensor);
      ctx.release(ws);
      if (!acc) {
        acc = std::move(br.dparams);
        acc_alloc = ctx.alloc(MemCategory::Gradients, p);
      } else {
        Allocation tmp = ctx.alloc(MemCategory::Gradients, p);
        acc = add(*acc, br.dparams);
        ctx.ledger.release(tmp);
      }
      Allocation dxa = ctx.alloc(MemCategory::Gradients, br.dx.size());
      ctx.ledger.release(cot[j].alloc);
      cot[j] = {std::move(br.dx), dxa};
      ctx.ledger.release(x.device);
    }
    ctx.eps.push_gradients(l, ctx.worker, *acc, ctx.ledger, acc_alloc);
    cur.release(ctx.ledger);
  }
  for (auto& c : cot) ctx.ledger.release(c.alloc);
  if (!stash.empty()) throw ConsistencyError("activation stash not drained");
  return loss;
}

// Forward and backward over the whole resident model for one microbatch.
// Every boundary activation and every layer's intermediates stay on device
// until the backward pass consumes them. Gradients are returned with their
// device allocations still live.
double whole_model_microbatch(WorkerContext& ctx,
                              const std::vector<DeviceLayer>& weights,
                              std::size_t j,
                              std::vector<std::pair<LayerParams, Allocation>>& grads) {
  const std::size_t n = ctx.model.depth();
  std::vector<DeviceBuffer> boundary;
  boundary.reserve(n + 1);
  std::vector<std::pair<IntermediateCache, std::optional<Allocation>>> caches;
  caches.reserve(n);

  Tensor x = ctx.micro_input(j);
  Allocation xa = ctx.alloc(MemCategory::ActivationStash, x.size());
  boundary.push_back({std::move(x), xa});
  for (std::size_t l = 0; l < n; ++l) {
    const LayerSpec& spec = ctx.model.layers[l];
    std::optional<Allocation> ws = ctx.alloc_workspace(spec);
    ForwardResult fr = layer_forward(spec, weights[l].params(), boundary[l].tensor);
    caches.emplace_back(std::move(fr.residuals), ws);
    Allocation ya = ctx.alloc(MemCategory::ActivationStash, fr.y.size());
    boundary.push_back({std::move(fr.y), ya});
  }

  Tensor target = ctx.micro_target(j);
  Allocation ta = ctx.alloc(MemCategory::Workspace, target.size());
  LossResult lr = loss_head(boundary[n].tensor, target, ctx.loss_scale());
  DeviceBuffer cot{std::move(lr.dpred),
                   ctx.alloc(MemCategory::Gradients, boundary[n].tensor.size())};
  ctx.ledger.release(ta);

  grads.assign(n, {});
  for (std::size_t l = n; l-- > 0;) {
    const LayerSpec& spec = ctx.model.layers[l];
    ctx.ledger.release(boundary[l + 1].alloc);
    BackwardResult br = layer_backward(spec, weights[l].params(), boundary[l].tensor,
                                       caches[l].first, cot.tensor);
    ctx.release(caches[l].second);
    Allocation ga = ctx.alloc(MemCategory::Gradients, spec.param_count());
    grads[l] = {std::move(br.dparams), ga};
    Allocation dxa = ctx.alloc(MemCategory::Gradients, br.dx.size());
    ctx.ledger.release(cot.alloc);
    cot = {std::move(br.dx), dxa};
  }
  ctx.ledger.release(boundary[0].alloc);
  ctx.ledger.release(cot.alloc);
  return lr.loss;
}

// Conventional (u == 1) and baseline-with-accumulated-gradients passes.
double whole_model_pass(WorkerContext& ctx) {
  const std::size_t n = ctx.model.depth();
  const std::size_t u = ctx.plan.u;

  std::vector<DeviceLayer> weights;
  weights.reserve(n);
  for (std::size_t l = 0; l < n; ++l) {
    weights.push_back(ctx.eps.fetch_layer(l, ctx.ledger));
    weights.back().make_resident(ctx.ledger);
  }

  // Whole-model accumulated-gradient buffer, only needed when u > 1.
  std::vector<Allocation> acc_alloc;
  if (u > 1) {
    for (std::size_t l = 0; l < n; ++l)
      acc_alloc.push_back(ctx.alloc(MemCategory::Gradients,
                                    ctx.model.layers[l].param_count()));
  }

  double loss = 0.0;
  std::vector<LayerParams> acc(n);
  std::vector<std::pair<LayerParams, Allocation>> grads;
  for (std::size_t j = 0; j < u; ++j) {
    loss += whole_model_microbatch(ctx, weights, j, grads);
    if (u == 1) {
      for (std::size_t l = 0; l < n; ++l) {
        acc[l] = std::move(grads[l].first);
        acc_alloc.push_back(grads[l].second);
      }
      break;
    }
    for (std::size_t l = 0; l < n; ++l) {
      acc[l] = j == 0 ? std::move(grads[l].first) : add(acc[l], grads[l].first);
      ctx.ledger.release(grads[l].second);
    }
  }

  for (std::size_t l = 0; l < n; ++l)
    ctx.eps.push_gradients(l, ctx.worker, acc[l], ctx.ledger, acc_alloc[l]);
  for (auto& w : weights) w.release(ctx.ledger);
  return loss;
}

std::vector<std::size_t> resolve_order(const RunOptions& options,
                                       std::size_t k) {
  if (options.worker_order.empty()) {
    std::vector<std::size_t> order(k);
    for (std::size_t w = 0; w < k; ++w) order[w] = w;
    return order;
  }
  std::vector<std::size_t> sorted = options.worker_order;
  std::sort(sorted.begin(), sorted.end());
  bool ok = sorted.size() == k;
  for (std::size_t w = 0; ok && w < k; ++w) ok = sorted[w] == w;
  if (!ok) throw PlanError("worker order is not a permutation of 0..k-1");
  return options.worker_order;
}

}  // namespace

std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Conventional:
      return "conventional";
    case ScheduleKind::BaselineAG:
      return "baseline_ag";
    case ScheduleKind::L2L:
      return "l2l";
  }
  return "?";
}

std::string_view to_string(StashPlacement s) {
  return s == StashPlacement::Host ? "host" : "device";
}

void BatchPlan::validate() const {
  if (ub == 0 || u == 0 || k == 0) {
    throw PlanError("batch plan needs ub, u and k all positive");
  }
}

void ActivationStash::store(std::size_t boundary, std::size_t micro,
                            const Tensor& t, const Allocation& device_copy,
                            MemoryLedger& ledger) {
  const auto key = std::make_pair(boundary, micro);
  if (entries_.contains(key)) {
    throw ConsistencyError("stash entry (" + std::to_string(boundary) + ", " +
                           std::to_string(micro) + ") stored twice");
  }
  Entry e{t, device_copy};
  if (placement_ == StashPlacement::Host) {
    ledger.record_transfer(TransferDirection::DeviceToHost,
                           t.size() * bytes_per_element_,
                           MemCategory::ActivationStash);
    e.device = {};
  }
  entries_.emplace(key, std::move(e));
}

ActivationStash::Entry ActivationStash::take(std::size_t boundary,
                                             std::size_t micro,
                                             MemoryLedger& ledger) {
  auto it = entries_.find({boundary, micro});
  if (it == entries_.end()) {
    throw ConsistencyError("stash miss for (" + std::to_string(boundary) +
                           ", " + std::to_string(micro) +
                           "): never stored or already consumed");
  }
  Entry e = std::move(it->second);
  entries_.erase(it);
  if (placement_ == StashPlacement::Host) {
    const std::uint64_t bytes = e.tensor.size() * bytes_per_element_;
    ledger.record_transfer(TransferDirection::HostToDevice, bytes,
                           MemCategory::ActivationStash);
    e.device = ledger.alloc_bytes(MemCategory::ActivationStash, bytes);
  }
  return e;
}

RunReport execute(const Schedule& schedule, const DataSource& data,
                  const BatchPlan& plan, EpsStore& eps,
                  std::span<MemoryLedger> ledgers, const RunOptions& options) {
  plan.validate();
  if (schedule.kind == ScheduleKind::Conventional && plan.u != 1) {
    throw PlanError("conventional execution runs a single microbatch (u = 1)");
  }
  if (eps.worker_count() != plan.k) {
    throw PlanError("EPS expects " + std::to_string(eps.worker_count()) +
                    " workers, plan has " + std::to_string(plan.k));
  }
  if (ledgers.size() != plan.k) {
    throw PlanError("need one memory ledger per worker");
  }
  const auto order = resolve_order(options, plan.k);
  const ModelSpec& model = eps.model();
  const Precision dp = eps.policy().device_precision();
  const std::size_t per_worker = plan.minibatch();

  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  for (std::size_t step = 0; step < options.steps; ++step) {
    const Minibatch batch = data.minibatch(step, plan.total_batch());
    if (batch.inputs.cols() != model.hidden ||
        batch.targets.cols() != model.hidden) {
      throw PlanError("minibatch width does not match the model");
    }
    std::vector<double> worker_loss(plan.k, 0.0);
    for (std::size_t w : order) {
      WorkerContext ctx{model,
                        eps,
                        ledgers[w],
                        w,
                        slice_rows(batch.inputs, w * per_worker, per_worker).to_precision(dp),
                        slice_rows(batch.targets, w * per_worker, per_worker).to_precision(dp),
                        plan};
      worker_loss[w] = schedule.kind == ScheduleKind::L2L
                           ? l2l_pass(ctx, schedule.stash)
                           : whole_model_pass(ctx);
    }
    eps.step_all();
    double loss = 0.0;
    for (double v : worker_loss) loss += v;
    report.loss_trace.push_back(loss / static_cast<double>(plan.k));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (auto& ledger : ledgers) report.worker_memory.push_back(ledger.report());
  report.memory = merge_reports(report.worker_memory);
  report.final_master = eps.snapshot();
  report.steps = options.steps;
  if (options.steps > 0) {
    for (std::size_t l = 0; l < eps.depth(); ++l)
      report.last_gradients.push_back(eps.last_gradient(l));
  }
  return report;
}

RunReport run_conventional(const DataSource& data, const BatchPlan& plan,
                           EpsStore& eps, MemoryLedger& ledger,
                           std::size_t steps) {
  if (plan.k != 1) throw PlanError("use run_data_parallel for k > 1");
  return execute(Schedule::conventional(), data, plan, eps, {&ledger, 1},
                 {steps, {}});
}

RunReport run_baseline_ag(const DataSource& data, const BatchPlan& plan,
                          EpsStore& eps, MemoryLedger& ledger,
                          std::size_t steps) {
  if (plan.k != 1) throw PlanError("use run_data_parallel for k > 1");
  return execute(Schedule::baseline_ag(), data, plan, eps, {&ledger, 1},
                 {steps, {}});
}

RunReport run_l2l(const DataSource& data, const BatchPlan& plan,
                  StashPlacement stash, EpsStore& eps, MemoryLedger& ledger,
                  std::size_t steps) {
  if (plan.k != 1) throw PlanError("use run_data_parallel for k > 1");
  return execute(Schedule::l2l(stash), data, plan, eps, {&ledger, 1},
                 {steps, {}});
}

RunReport run_data_parallel(const Schedule& schedule, const DataSource& data,
                            const BatchPlan& plan, EpsStore& eps,
                            std::vector<MemoryLedger>& ledgers,
                            const RunOptions& options) {
  return execute(schedule, data, plan, eps, ledgers, options);
}

double reference_minibatch_loss(const ModelSpec& model,
                                const std::vector<LayerParams>& params,
                                const Minibatch& batch, const BatchPlan& plan) {
  const double scale = 1.0 / static_cast<double>(plan.u);
  double total = 0.0;
  for (std::size_t w = 0; w < plan.k; ++w) {
    double worker = 0.0;
    for (std::size_t j = 0; j < plan.u; ++j) {
      const std::size_t row = (w * plan.u + j) * plan.ub;
      Tensor y = slice_rows(batch.inputs, row, plan.ub).to_precision(Precision::FP64);
      for (std::size_t l = 0; l < model.depth(); ++l)
        y = layer_forward(model.layers[l], params[l], y).y;
      Tensor t = slice_rows(batch.targets, row, plan.ub).to_precision(Precision::FP64);
      worker += loss_head(y, t, scale).loss;
    }
    total += worker;
  }
  return total / static_cast<double>(plan.k);
}

double gradcheck_error(double analytic, double numeric) {
  const double denom = std::max({kGradcheckFloor, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

GradcheckResult gradcheck(const ModelSpec& model, const BatchPlan& plan,
                          const Schedule& schedule,
                          std::optional<std::vector<LayerParams>> params,
                          double step) {
  plan.validate();
  if (model.param_count() > kGradcheckMaxParams) {
    throw UsageError("gradcheck is limited to models of at most " +
                     std::to_string(kGradcheckMaxParams) + " parameters");
  }
  std::vector<LayerParams> base =
      params ? std::move(*params) : init_params(model, Precision::FP64);
  for (auto& p : base) p = p.to_precision(Precision::FP64);

  TeacherTask data(model, model.seed);
  const Minibatch batch = data.minibatch(0, plan.total_batch());

  EpsStore eps(model, base, PrecisionPolicy::fp64(), OptimizerConfig::sgd(0.0),
               plan.k);
  std::vector<MemoryLedger> ledgers(plan.k);
  FixedData fixed({batch});
  RunReport run = execute(schedule, fixed, plan, eps, ledgers, {1, {}});

  GradcheckResult result;
  for (std::size_t l = 0; l < model.depth(); ++l) {
    for (std::size_t ti = 0; ti < base[l].tensors.size(); ++ti) {
      const Tensor& orig = base[l].tensors[ti];
      for (std::size_t e = 0; e < orig.size(); ++e) {
        auto perturbed = [&](double delta) {
          std::vector<double> v(orig.values().begin(), orig.values().end());
          v[e] += delta;
          std::vector<LayerParams> p = base;
          p[l].tensors[ti] = Tensor::from_values(orig.shape(), std::move(v),
                                                 Precision::FP64);
          return reference_minibatch_loss(model, p, batch, plan);
        };
        const double numeric = (perturbed(step) - perturbed(-step)) / (2.0 * step);
        const double analytic = run.last_gradients[l].tensors[ti].at(e);
        result.max_abs_error =
            std::max(result.max_abs_error, std::fabs(analytic - numeric));
        result.max_rel_error =
            std::max(result.max_rel_error, gradcheck_error(analytic, numeric));
        ++result.checked;
      }
    }
  }
  return result;
}

}  // namespace l2l
