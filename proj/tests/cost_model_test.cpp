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

#include <gtest/gtest.h>

#include <cmath>

#include "l2l/error.hpp"

namespace l2l {
namespace {

// Scan oracle: first u whose overhead is within target, using the overhead
// written out as 2X / (4uC + 2X).
std::uint64_t scan_min_u(double x, double c, double target) {
  for (std::uint64_t u = 1;; ++u)
    if (2 * x / (4 * static_cast<double>(u) * c + 2 * x) <= target) return u;
}

TEST(CostModelTest, TransferTime) {
  CostParams p;
  p.layer_mb = 12.0;
  p.bandwidth_gbps = 12.0;
  EXPECT_EQ(eval_no_innerloop(p).transfer_ms, 1.0);
}

TEST(CostModelTest, SingleMicrobatchThroughput) {
  const CostReport r = eval_no_innerloop(CostParams::from_times(1.0, 1.0, 64, 4, 1));
  EXPECT_DOUBLE_EQ(r.t_training, 1000.0 * 64 / 6);
  EXPECT_NEAR(r.t_training, 10666.7, 0.05);
  EXPECT_EQ(r.total_ms, 24.0);
}

TEST(CostModelTest, TransferFreeIdeal) {
  const CostReport r = eval_no_innerloop(CostParams::from_times(0.0, 1.0, 32, 4, 1));
  EXPECT_EQ(r.t_training, 1000.0 * 32 / 4);
  EXPECT_EQ(r.overhead_fraction, 0.0);
}

TEST(CostModelTest, NoInnerloopRejectsU) {
  EXPECT_THROW(eval_no_innerloop(CostParams::from_times(1, 1, 1, 1, 2)), DomainError);
}

TEST(CostModelTest, OverheadAtTenMicrobatches) {
  const CostReport r = eval_innerloop(CostParams::from_times(1.0, 1.0, 8, 12, 10));
  EXPECT_DOUBLE_EQ(r.overhead_fraction, 2.0 / 42.0);
  EXPECT_LT(r.overhead_fraction, 0.10);
}

TEST(CostModelTest, ThroughputRisesTowardIdeal) {
  double prev = 0.0;
  for (std::uint64_t u = 1; u <= 4096; u *= 2) {
    const double t = eval_innerloop(CostParams::from_times(1.0, 1.0, 8, 4, u)).t_training;
    EXPECT_GT(t, prev);
    EXPECT_LT(t, 1000.0 * 8 / 4.0);
    prev = t;
  }
}

TEST(CostModelTest, UOneCollapse) {
  for (double x : {0.0, 0.5, 1.0, 3.0}) {
    const CostParams p = CostParams::from_times(x, 1.25, 16, 24, 1);
    const CostReport a = eval_innerloop(p);
    const CostReport b = eval_no_innerloop(p);
    EXPECT_EQ(a.total_ms, b.total_ms);
    EXPECT_EQ(a.t_training, b.t_training);
    EXPECT_EQ(a.t_forward, b.t_forward);
    EXPECT_EQ(a.overhead_fraction, b.overhead_fraction);
  }
}

TEST(CostModelTest, MinUExamples) {
  const CostParams p = CostParams::from_times(1.0, 1.0, 8, 4, 1);
  EXPECT_EQ(min_u_for_overhead(p, 0.10), 5u);
  EXPECT_DOUBLE_EQ(overhead_fraction(1.0, 1.0, 5), 2.0 / 22.0);
  EXPECT_EQ(min_u_for_overhead(p, 0.50), 1u);
  EXPECT_EQ(min_u_for_overhead(CostParams::from_times(0.0, 1.0, 8, 4, 1), 0.01), 1u);
  EXPECT_THROW(min_u_for_overhead(p, 0.0), DomainError);
  EXPECT_THROW(min_u_for_overhead(p, 1.0), DomainError);
}

TEST(CostModelTest, MinUMatchesScan) {
  for (double x : {0.1, 1.0, 2.0, 7.5, 33.0})
    for (double c : {0.05, 0.3, 1.0, 4.0})
      for (double target : {0.01, 0.05, 0.0909090909090909, 0.1, 0.25, 0.5}) {
        EXPECT_EQ(min_u_for_overhead(CostParams::from_times(x, c, 8, 4, 1), target),
                  scan_min_u(x, c, target))
            << x << " " << c << " " << target;
      }
}

TEST(CostModelTest, L2lpProjection) {
  const CostParams p24 = CostParams::from_times(1.0, 1.0, 8, 24, 4);
  EXPECT_DOUBLE_EQ(l2lp_projection(p24, 0.5).hidden_fraction, 11.0 / 12.0);
  EXPECT_EQ(l2lp_projection(p24, 0.5).exposed_ms, 1.0);
  EXPECT_EQ(l2lp_projection(p24, 0.0).exposed_ms, 0.0);
  EXPECT_EQ(l2lp_projection(CostParams::from_times(1, 1, 8, 2, 4), 0.5).hidden_fraction, 0.0);
}

TEST(CostModelTest, ParamsFromModel) {
  const ModelSpec m = ModelSpec::encoder_stack(24, 1024, 4096, 1);
  const CostParams fp32 = params_from_model(m, Precision::FP32, 12, 15, 4, 2);
  EXPECT_DOUBLE_EQ(fp32.layer_mb, 33.574912);
  EXPECT_EQ(fp32.n_layers, 24.0);
  const CostParams half = params_from_model(m, Precision::SimFP16, 12, 15, 4, 2);
  EXPECT_EQ(half.layer_mb * 2, fp32.layer_mb);
  const CostParams dbl = params_from_model(m, Precision::FP32, 12, 15, 8, 2);
  EXPECT_EQ(dbl.gops, 2 * fp32.gops);
}

TEST(CostModelTest, DomainErrorsNameTheParameter) {
  CostParams p;
  p.bandwidth_gbps = 0.0;
  try {
    eval_innerloop(p);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find(" B "), std::string::npos);
  }
  p = CostParams{};
  p.layer_mb = -1.0;
  EXPECT_THROW(eval_innerloop(p), DomainError);
}

TEST(CostModelTest, CsvRow) {
  const CostParams p = CostParams::from_times(1.0, 1.0, 8, 4, 10);
  EXPECT_EQ(cost_csv_header(),
            "N,L_MB,B_GBps,c_Gops,F_TFLOPs,ub,u,X_ms,C_ms,total_ms,t_fwd,t_train,overhead");
  EXPECT_EQ(cost_csv_row(p, eval_innerloop(p)),
            "4,1,1,1,1,8,10,1,1,168,10000,1904.7619,0.0476190476");
}

}  // namespace
}  // namespace l2l
