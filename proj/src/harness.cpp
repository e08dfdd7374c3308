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

#include "l2l/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "l2l/error.hpp"

namespace l2l {

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string run_id_for(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "r%04zu", index);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot write " + path.string());
  os << text;
  if (!os) throw UsageError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create " + dir.string() + ": " + ec.message());
}

std::string precision_tag(const RunConfig& c) {
  return std::string(to_string(c.precision.tag));
}

// Whole-model schedules keep every activation on device.
std::string stash_tag(const RunConfig& c) {
  return std::string(c.schedule.kind == ScheduleKind::L2L
                         ? to_string(c.schedule.stash)
                         : to_string(StashPlacement::Device));
}

}  // namespace

RunOutcome execute_config(const RunConfig& config) {
  RunOutcome out;
  std::vector<MemoryLedger> ledgers;
  try {
    config.validate();
    const ModelSpec model = config.model();
    TeacherTask data(model, config.seed);
    EpsStore eps(model, config.precision, config.optimizer, config.k);
    ledgers.assign(config.k, MemoryLedger(config.device_budget));
    RunReport report = execute(config.schedule, data, config.plan(), eps,
                               ledgers, {config.steps, {}});
    out.peak_bytes = report.memory.device_peak;
    out.h2d_bytes = report.memory.h2d_bytes;
    out.d2h_bytes = report.memory.d2h_bytes;
    out.report = std::move(report);
  } catch (const OutOfMemoryError& e) {
    out.status = "oom";
    out.message = e.what();
    for (const auto& l : ledgers) out.peak_bytes = std::max(out.peak_bytes, l.device_peak());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    out.status = "error";
    out.message = e.what();
  }
  return out;
}

std::string runs_csv_header() {
  return "run_id,schedule,N,H,I,ub,u,stash,precision,peak_bytes,"
         "transferred_h2d,transferred_d2h,status";
}

std::string runs_csv_row(const std::string& run_id, const RunConfig& c,
                         const RunOutcome& o) {
  std::ostringstream os;
  os << run_id << ',' << to_string(c.schedule.kind) << ',' << c.n_layers << ','
     << c.hidden << ',' << c.intermediate << ',' << c.ub << ',' << c.u << ','
     << stash_tag(c) << ',' << precision_tag(c) << ','
     << o.peak_bytes << ',' << o.h2d_bytes << ',' << o.d2h_bytes << ','
     << o.status;
  return os.str();
}

std::string loss_csv(const std::vector<double>& loss_trace) {
  std::string s = "step,loss\n";
  for (std::size_t i = 0; i < loss_trace.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, loss_trace[i]);
    s += buf;
  }
  return s;
}

CostParams cost_params_for(const RunConfig& c) {
  return params_from_model(c.model(), c.precision.device_precision(),
                           c.bandwidth_gbps, c.flops_tflops, c.ub, c.u);
}

int cmd_run(const RunConfig& config, const std::filesystem::path& out_dir,
            std::ostream& out, std::ostream& err) {
  ensure_dir(out_dir);
  const RunOutcome o = execute_config(config);
  write_file(out_dir / "runs.csv",
             runs_csv_header() + "\n" + runs_csv_row(run_id_for(0), config, o) + "\n");
  write_file(out_dir / "loss.csv",
             loss_csv(o.report ? o.report->loss_trace : std::vector<double>{}));
  const CostParams cp = cost_params_for(config);
  const CostReport cr = eval_innerloop(cp);
  write_file(out_dir / "cost.csv",
             cost_csv_header() + "\n" + cost_csv_row(cp, cr) + "\n");

  if (o.status != "ok") {
    err << "run failed (" << o.status << "): " << o.message << "\n";
    return kExitFailure;
  }
  out << "schedule " << to_string(config.schedule.kind) << ", N=" << config.n_layers
      << ", ub=" << config.ub << ", u=" << config.u << ", k=" << config.k
      << ", precision " << precision_tag(config) << "\n";
  out << "device peak " << o.peak_bytes << " bytes, h2d " << o.h2d_bytes
      << " bytes, d2h " << o.d2h_bytes << " bytes\n";
  if (!o.report->loss_trace.empty()) {
    out << "loss " << fmt_g(o.report->loss_trace.front()) << " -> "
        << fmt_g(o.report->loss_trace.back()) << " over " << config.steps
        << " steps\n";
  }
  out << "modeled training throughput " << fmt_g(cr.t_training)
      << " samples/s\n";
  return kExitOk;
}

int cmd_sweep(const SweepSpec& sweep, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err) {
  ensure_dir(out_dir);
  const std::vector<RunConfig> runs = sweep.expand();
  std::string runs_text = runs_csv_header() + "\n";
  std::string cost_text = cost_csv_header() + "\n";
  bool all_ok = true;

  char line[256];
  std::snprintf(line, sizeof line, "%-6s %-13s %5s %4s %4s %-6s %-5s %14s %14s %s\n",
                "run", "schedule", "N", "ub", "u", "stash", "prec", "peak_bytes",
                "model_samp/s", "status");
  std::string table = line;

  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunConfig& c = runs[i];
    const std::string id = run_id_for(i);
    RunOutcome o;
    try {
      o = execute_config(c);
    } catch (const ConfigError& e) {
      o.status = "error";
      o.message = e.what();
    }
    if (o.status != "ok") {
      all_ok = false;
      err << id << ": " << o.status << ": " << o.message << "\n";
    }
    runs_text += runs_csv_row(id, c, o) + "\n";
    write_file(out_dir / ("loss_" + id + ".csv"),
               loss_csv(o.report ? o.report->loss_trace : std::vector<double>{}));

    double modeled = std::nan("");
    try {
      const CostParams cp = cost_params_for(c);
      const CostReport cr = eval_innerloop(cp);
      cost_text += cost_csv_row(cp, cr) + "\n";
      modeled = cr.t_training;
    } catch (const Error&) {
    }
    std::snprintf(line, sizeof line,
                  "%-6s %-13s %5zu %4zu %4zu %-6s %-5s %14llu %14.6g %s\n",
                  id.c_str(), std::string(to_string(c.schedule.kind)).c_str(),
                  c.n_layers, c.ub, c.u,
                  stash_tag(c).c_str(),
                  precision_tag(c).c_str(),
                  static_cast<unsigned long long>(o.peak_bytes), modeled,
                  o.status.c_str());
    table += line;
  }
  write_file(out_dir / "runs.csv", runs_text);
  write_file(out_dir / "cost.csv", cost_text);
  out << table;
  return all_ok ? kExitOk : kExitFailure;
}

int cmd_costmodel(const CostParams& params, std::optional<double> min_u_target,
                  const std::filesystem::path& out_dir, std::ostream& out,
                  std::ostream&) {
  const CostReport r = eval_innerloop(params);
  std::optional<std::uint64_t> min_u;
  if (min_u_target) min_u = min_u_for_overhead(params, *min_u_target);
  out << format_cost_report(params, r);
  if (params.u == 1) {
    const CostReport flat = eval_no_innerloop(params);
    out << "  single-microbatch training throughput "
        << fmt_g(flat.t_training) << " samples/s\n";
  }
  if (min_u) {
    out << "  min u for overhead <= " << fmt_g(*min_u_target) << ": u=" << *min_u
        << "\n";
  }
  ensure_dir(out_dir);
  write_file(out_dir / "cost.csv",
             cost_csv_header() + "\n" + cost_csv_row(params, r) + "\n");
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  c.validate();
  const ModelSpec model = c.model();
  const BatchPlan plan = c.plan();
  const GradcheckResult g = gradcheck(model, plan, c.schedule);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "gradcheck %s N=%zu H=%zu I=%zu ub=%zu u=%zu k=%zu: %zu params, "
                "max rel error %.3e, max abs error %.3e\n",
                std::string(to_string(c.schedule.kind)).c_str(), c.n_layers,
                c.hidden, c.intermediate, c.ub, c.u, c.k, g.checked,
                g.max_rel_error, g.max_abs_error);
  out << buf;
  const bool ok = g.max_rel_error <= 1e-6;
  out << (ok ? "PASS" : "FAIL") << " (tolerance 1e-06)\n";
  return ok ? kExitOk : kExitFailure;
}

namespace {

RunReport run_fp64(const Schedule& schedule, const ModelSpec& model,
                   const BatchPlan& plan, std::size_t steps,
                   PrecisionPolicy policy = PrecisionPolicy::fp64(),
                   const RunOptions* options = nullptr,
                   std::optional<std::uint64_t> budget = std::nullopt) {
  TeacherTask data(model, model.seed);
  EpsStore eps(model, policy, OptimizerConfig::sgd(0.05), plan.k);
  std::vector<MemoryLedger> ledgers(plan.k, MemoryLedger(budget));
  RunOptions opt = options ? *options : RunOptions{};
  opt.steps = steps;
  return execute(schedule, data, plan, eps, ledgers, opt);
}

bool same_gradients(const RunReport& a, const RunReport& b) {
  if (a.last_gradients.size() != b.last_gradients.size()) return false;
  for (std::size_t l = 0; l < a.last_gradients.size(); ++l)
    if (!a.last_gradients[l].bitwise_equal(b.last_gradients[l])) return false;
  return true;
}

SuiteResult suite_gradcheck() {
  SuiteResult r{"gradcheck", true, ""};
  const ModelSpec model = ModelSpec::encoder_stack(2, 4, 8, 1);
  double worst = 0.0;
  const std::vector<std::pair<Schedule, BatchPlan>> cases = {
      {Schedule::l2l(StashPlacement::Host), {2, 2, 1}},
      {Schedule::l2l(StashPlacement::Device), {2, 2, 1}},
      {Schedule::baseline_ag(), {2, 2, 1}},
      {Schedule::conventional(), {4, 1, 1}},
      {Schedule::l2l(StashPlacement::Host), {1, 2, 2}},
  };
  for (const auto& [s, p] : cases)
    worst = std::max(worst, gradcheck(model, p, s).max_rel_error);
  r.passed = worst <= 1e-6;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu configs, max rel error <= 1e-6: %s",
                cases.size(), r.passed ? "yes" : "no");
  r.detail = buf;
  return r;
}

SuiteResult suite_loop_inversion() {
  SuiteResult r{"loop_inversion", true, ""};
  std::size_t n = 0;
  for (std::size_t N : {2, 4})
    for (std::size_t u : {1, 2, 4})
      for (std::size_t ub : {1, 2})
        for (std::uint64_t seed : {1, 2}) {
          const ModelSpec m = ModelSpec::encoder_stack(N, 8, 16, seed);
          const BatchPlan p{ub, u, 1};
          const RunReport a = run_fp64(Schedule::l2l(StashPlacement::Host), m, p, 2);
          const RunReport b = run_fp64(Schedule::baseline_ag(), m, p, 2);
          r.passed = r.passed && a.final_master.bitwise_equal(b.final_master) &&
                     same_gradients(a, b);
          ++n;
        }
  r.detail = std::to_string(n) + " configs, l2l vs baseline_ag bitwise";
  return r;
}

SuiteResult suite_eager_reduce() {
  SuiteResult r{"eager_reduce", true, ""};
  const ModelSpec m = ModelSpec::encoder_stack(3, 8, 16, 3);
  for (std::size_t k : {2, 4}) {
    const RunReport single = run_fp64(Schedule::l2l(StashPlacement::Host), m,
                                      {2, k, 1}, 2);
    std::vector<std::size_t> order(k);
    for (std::size_t w = 0; w < k; ++w) order[w] = k - 1 - w;
    const RunOptions reversed{0, order};
    const RunReport fwd = run_fp64(Schedule::l2l(StashPlacement::Host), m,
                                   {2, 1, k}, 2);
    const RunReport rev = run_fp64(Schedule::l2l(StashPlacement::Host), m,
                                   {2, 1, k}, 2, PrecisionPolicy::fp64(), &reversed);
    r.passed = r.passed && fwd.final_master.bitwise_equal(single.final_master) &&
               rev.final_master.bitwise_equal(single.final_master);
  }
  r.detail = "k in {2,4} vs single worker, forward and reversed order";
  return r;
}

SuiteResult suite_constant_memory() {
  SuiteResult r{"constant_memory", true, ""};
  std::optional<std::uint64_t> peak;
  for (std::size_t N : {4, 24, 96}) {
    const ModelSpec m = ModelSpec::encoder_stack(N, 16, 64, 1);
    const RunReport a = run_fp64(Schedule::l2l(StashPlacement::Host), m,
                                 {4, 2, 1}, 1, PrecisionPolicy::fp32());
    if (peak && *peak != a.memory.device_peak) r.passed = false;
    peak = a.memory.device_peak;
  }
  const RunReport conv24 = run_fp64(Schedule::conventional(),
                                    ModelSpec::encoder_stack(24, 16, 64, 1),
                                    {8, 1, 1}, 1, PrecisionPolicy::fp32());
  bool oom = false;
  try {
    run_fp64(Schedule::conventional(), ModelSpec::encoder_stack(48, 16, 64, 1),
             {8, 1, 1}, 1, PrecisionPolicy::fp32(), nullptr,
             conv24.memory.device_peak);
  } catch (const OutOfMemoryError&) {
    oom = true;
  }
  r.passed = r.passed && oom;
  r.detail = "l2l host-stash peak " + std::to_string(*peak) +
             " bytes at N in {4,24,96}; conventional N=48 oom: " +
             (oom ? "yes" : "no");
  return r;
}

SuiteResult suite_cost_identities() {
  SuiteResult r{"cost_identities", true, ""};
  CostParams p = CostParams::from_times(1.0, 1.0, 1.0, 4.0, 10);
  r.passed = std::fabs(eval_innerloop(p).overhead_fraction - 2.0 / 42.0) <= 1e-15 &&
             min_u_for_overhead(p, 0.10) == 5;
  CostParams one = CostParams::from_times(2.0, 1.0, 1.0, 4.0, 1);
  CostParams four = one;
  four.u = 4;
  const double ratio = eval_innerloop(four).t_training / eval_innerloop(one).t_training;
  r.passed = r.passed && std::fabs(ratio - 1.6) <= 1e-12;
  const CostReport a = eval_innerloop(one);
  const CostReport b = eval_no_innerloop(one);
  r.passed = r.passed && a.total_ms == b.total_ms && a.t_training == b.t_training &&
             a.t_forward == b.t_forward && a.overhead_fraction == b.overhead_fraction;
  double prev = 0.0;
  for (std::uint64_t u = 1; u <= 64; ++u) {
    CostParams q = one;
    q.u = u;
    const double t = eval_innerloop(q).t_training;
    r.passed = r.passed && t > prev;
    prev = t;
  }
  r.detail = "overhead(u=10)=2/42, min_u(0.10)=5, ratio 1.60, u=1 collapse, monotone";
  return r;
}

SuiteResult suite_transfer_accounting() {
  SuiteResult r{"transfer_accounting", true, ""};
  const std::size_t N = 3;
  const ModelSpec m = ModelSpec::encoder_stack(N, 8, 16, 1);
  const std::uint64_t params = m.layers[0].param_count();
  for (std::size_t u : {1, 2, 4}) {
    const auto fp32 = run_fp64(Schedule::l2l(StashPlacement::Host), m, {2, u, 1}, 1,
                               PrecisionPolicy::fp32());
    const auto cmp = run_fp64(Schedule::l2l(StashPlacement::Host), m, {2, u, 1}, 1,
                              PrecisionPolicy::cmp());
    r.passed = r.passed &&
               fp32.memory.h2d(MemCategory::LayerWeights) == 2 * N * params * 4 &&
               cmp.memory.h2d(MemCategory::LayerWeights) == 2 * N * params * 2;
  }
  r.detail = "weight h2d = 2*N*P*bytes for u in {1,2,4}, fp32 and cmp";
  return r;
}

SuiteResult suite_cmp_identity() {
  SuiteResult r{"cmp_identity", true, ""};
  const ModelSpec m = ModelSpec::encoder_stack(2, 8, 16, 1);
  const auto a = run_fp64(Schedule::l2l(StashPlacement::Host), m, {2, 2, 1}, 3,
                          PrecisionPolicy::fp32());
  const auto b = run_fp64(Schedule::l2l(StashPlacement::Host), m, {2, 2, 1}, 3,
                          PrecisionPolicy::cmp_unquantized());
  r.passed = a.final_master.bitwise_equal(b.final_master) && a.loss_trace == b.loss_trace;
  r.detail = "cmp with identity quantizer vs fp32, 3 steps bitwise";
  return r;
}

}  // namespace

std::vector<VerificationSuite> verification_suites() {
  return {
      {"gradcheck", suite_gradcheck},
      {"loop_inversion", suite_loop_inversion},
      {"eager_reduce", suite_eager_reduce},
      {"constant_memory", suite_constant_memory},
      {"cost_identities", suite_cost_identities},
      {"transfer_accounting", suite_transfer_accounting},
      {"cmp_identity", suite_cmp_identity},
  };
}

int cmd_verify(std::ostream& out) {
  bool all = true;
  char buf[512];
  for (const auto& suite : verification_suites()) {
    SuiteResult res;
    try {
      res = suite.run();
    } catch (const std::exception& e) {
      res = {suite.name, false, std::string("exception: ") + e.what()};
    }
    all = all && res.passed;
    std::snprintf(buf, sizeof buf, "%-20s %-4s  %s\n", suite.name.c_str(),
                  res.passed ? "PASS" : "FAIL", res.detail.c_str());
    out << buf;
  }
  out << (all ? "all suites passed\n" : "some suites FAILED\n");
  return all ? kExitOk : kExitFailure;
}

}  // namespace l2l
