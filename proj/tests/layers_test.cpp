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

#include "l2l/layers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "l2l/error.hpp"

namespace l2l {
namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(r * c);
  for (double& x : v) x = d(rng);
  return Tensor::from_values({r, c}, std::move(v), Precision::FP64);
}

// y = x + gelu(x W1 + b1) W2 + b2 with plain loops and std::erf.
std::vector<double> straight_line_forward(const LayerParams& p,
                                          const std::vector<double>& x,
                                          std::size_t rows, std::size_t h,
                                          std::size_t i_dim) {
  const auto& w1 = p.tensors[0];
  const auto& b1 = p.tensors[1];
  const auto& w2 = p.tensors[2];
  const auto& b2 = p.tensors[3];
  std::vector<double> y(rows * h);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> act(i_dim);
    for (std::size_t j = 0; j < i_dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < h; ++k) s += x[r * h + k] * w1.at(k * i_dim + j);
      s += b1.at(j);
      act[j] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
    }
    for (std::size_t o = 0; o < h; ++o) {
      double s = 0.0;
      for (std::size_t j = 0; j < i_dim; ++j) s += act[j] * w2.at(j * h + o);
      y[r * h + o] = x[r * h + o] + (s + b2.at(o));
    }
  }
  return y;
}

LayerParams with_zero_weights(const LayerSpec& spec) {
  LayerParams p;
  for (const auto& s : spec.param_shapes()) p.tensors.emplace_back(s, Precision::FP64);
  return p;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i) * b.at(i);
  return s;
}

Tensor perturb(const Tensor& t, std::size_t e, double delta) {
  std::vector<double> v(t.values().begin(), t.values().end());
  v[e] += delta;
  return Tensor::from_values(t.shape(), std::move(v), Precision::FP64);
}

double rel_error(double a, double b) {
  return std::fabs(a - b) / std::max({1e-8, std::fabs(a), std::fabs(b)});
}

TEST(LayerSpecTest, ParamCounts) {
  const LayerSpec big = LayerSpec::encoder_block(1024, 4096);
  EXPECT_EQ(big.param_count(), 8393728u);
  EXPECT_EQ(LayerSpec::affine(3, 5).param_count(), 20u);
  EXPECT_EQ(ModelSpec::encoder_stack(3, 4, 8, 1).param_count(), 3u * 76u);
  EXPECT_EQ(big.param_names().size(), 4u);
}

TEST(LayerForwardTest, ZeroWeightsIsIdentity) {
  const LayerSpec spec = LayerSpec::encoder_block(4, 8);
  const Tensor x = random_tensor(3, 4, 1);
  EXPECT_TRUE(layer_forward(spec, with_zero_weights(spec), x).y.bitwise_equal(x));
}

TEST(LayerForwardTest, MatchesStraightLineOracle) {
  const ModelSpec model = ModelSpec::encoder_stack(1, 4, 8, 7);
  const LayerParams p = init_params(model, Precision::FP64)[0];
  const Tensor x = Tensor::from_values({1, 4}, {1, 1, 1, 1}, Precision::FP64);
  const Tensor y = layer_forward(model.layers[0], p, x).y;
  const auto oracle = straight_line_forward(p, {1, 1, 1, 1}, 1, 4, 8);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.at(i), oracle[i], 1e-14);

  const Tensor xb = random_tensor(5, 4, 3);
  const Tensor yb = layer_forward(model.layers[0], p, xb).y;
  const auto ob = straight_line_forward(
      p, std::vector<double>(xb.values().begin(), xb.values().end()), 5, 4, 8);
  for (std::size_t i = 0; i < ob.size(); ++i) EXPECT_NEAR(yb.at(i), ob[i], 1e-14);
}

TEST(LayerForwardTest, RowsAreIndependent) {
  const ModelSpec model = ModelSpec::encoder_stack(1, 4, 8, 3);
  const LayerParams p = init_params(model, Precision::FP64)[0];
  const Tensor x1 = random_tensor(1, 4, 10);
  const Tensor x2 = random_tensor(1, 4, 11);
  const std::vector<Tensor> xs = {x1, x2};
  const std::vector<Tensor> ys = {layer_forward(model.layers[0], p, x1).y,
                                  layer_forward(model.layers[0], p, x2).y};
  EXPECT_TRUE(layer_forward(model.layers[0], p, concat_rows(xs))
                  .y.bitwise_equal(concat_rows(ys)));
}

TEST(LayerBackwardTest, ZeroCotangent) {
  const ModelSpec model = ModelSpec::encoder_stack(1, 4, 8, 2);
  const LayerParams p = init_params(model, Precision::FP64)[0];
  const Tensor x = random_tensor(2, 4, 5);
  const auto fr = layer_forward(model.layers[0], p, x);
  const auto br = layer_backward(model.layers[0], p, x, fr.residuals,
                                 Tensor::zeros(2, 4, Precision::FP64));
  EXPECT_TRUE(br.dx.bitwise_equal(Tensor::zeros(2, 4, Precision::FP64)));
  EXPECT_TRUE(br.dparams.bitwise_equal(zeros_like(p)));
}

TEST(LayerBackwardTest, ZeroWeightsPassCotangentThrough) {
  const LayerSpec spec = LayerSpec::encoder_block(4, 8);
  const LayerParams p = with_zero_weights(spec);
  const Tensor x = random_tensor(2, 4, 6);
  const Tensor dy = random_tensor(2, 4, 7);
  const auto fr = layer_forward(spec, p, x);
  const auto br = layer_backward(spec, p, x, fr.residuals, dy);
  EXPECT_TRUE(br.dx.bitwise_equal(dy));
  // gelu(0) = 0 makes dW2 vanish; db2 is the column sum of dy.
  EXPECT_TRUE(br.dparams.tensors[3].bitwise_equal(column_sum(dy)));
}

TEST(LayerBackwardTest, FiniteDifferencesOverSeeds) {
  const double h = 1e-4;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ModelSpec model = ModelSpec::encoder_stack(1, 4, 8, seed == 1 ? 7 : seed);
    const LayerSpec& spec = model.layers[0];
    const LayerParams p = init_params(model, Precision::FP64)[0];
    const Tensor x = random_tensor(2, 4, 100 + seed);
    const Tensor dy = random_tensor(2, 4, 200 + seed);
    const auto br = layer_backward(spec, p, x, layer_forward(spec, p, x).residuals, dy);

    auto objective = [&](const LayerParams& q, const Tensor& xin) {
      return dot(layer_forward(spec, q, xin).y, dy);
    };
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
      for (std::size_t e = 0; e < p.tensors[t].size(); ++e) {
        LayerParams plus = p, minus = p;
        plus.tensors[t] = perturb(p.tensors[t], e, h);
        minus.tensors[t] = perturb(p.tensors[t], e, -h);
        const double fd = (objective(plus, x) - objective(minus, x)) / (2 * h);
        worst = std::max(worst, rel_error(br.dparams.tensors[t].at(e), fd));
      }
    }
    for (std::size_t e = 0; e < x.size(); ++e) {
      const double fd =
          (objective(p, perturb(x, e, h)) - objective(p, perturb(x, e, -h))) / (2 * h);
      worst = std::max(worst, rel_error(br.dx.at(e), fd));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(LayerBackwardTest, AffineFiniteDifferences) {
  const LayerSpec spec = LayerSpec::affine(3, 2);
  const LayerParams p = init_layer_params(spec, 9, 0, Precision::FP64);
  const Tensor x = random_tensor(4, 3, 1);
  const Tensor dy = random_tensor(4, 2, 2);
  const auto br = layer_backward(spec, p, x, layer_forward(spec, p, x).residuals, dy);
  for (std::size_t e = 0; e < p.tensors[0].size(); ++e) {
    LayerParams plus = p, minus = p;
    plus.tensors[0] = perturb(p.tensors[0], e, 1e-4);
    minus.tensors[0] = perturb(p.tensors[0], e, -1e-4);
    const double fd = (dot(layer_forward(spec, plus, x).y, dy) -
                       dot(layer_forward(spec, minus, x).y, dy)) / 2e-4;
    EXPECT_LE(rel_error(br.dparams.tensors[0].at(e), fd), 1e-8);
  }
}

TEST(LayerBackwardTest, StaleResidualsRejected) {
  const ModelSpec model = ModelSpec::encoder_stack(1, 4, 8, 2);
  const LayerParams p = init_params(model, Precision::FP64)[0];
  const auto fr = layer_forward(model.layers[0], p, random_tensor(2, 4, 1));
  EXPECT_THROW(layer_backward(model.layers[0], p, random_tensor(3, 4, 1),
                              fr.residuals, random_tensor(3, 4, 2)),
               ConsistencyError);
}

TEST(LossHeadTest, Examples) {
  const Tensor t = random_tensor(2, 3, 4);
  const LossResult same = loss_head(t, t, 1.0);
  EXPECT_EQ(same.loss, 0.0);
  EXPECT_TRUE(same.dpred.bitwise_equal(Tensor::zeros(2, 3, Precision::FP64)));

  const Tensor pred = Tensor::from_values({1, 2}, {3, 5}, Precision::FP64);
  const Tensor target = Tensor::from_values({1, 2}, {2, 4}, Precision::FP64);
  const LossResult r = loss_head(pred, target, 1.0);
  EXPECT_EQ(r.loss, 1.0);
  EXPECT_TRUE(r.dpred.bitwise_equal(Tensor::from_values({1, 2}, {1, 1}, Precision::FP64)));
  EXPECT_EQ(loss_head(pred, target, 0.5).loss, 0.5);
}

TEST(InitTest, DeterministicAndSeedSensitive) {
  const auto a = init_params(ModelSpec::encoder_stack(3, 4, 8, 1));
  const auto b = init_params(ModelSpec::encoder_stack(3, 4, 8, 1));
  const auto c = init_params(ModelSpec::encoder_stack(3, 4, 8, 2));
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_TRUE(a[l].bitwise_equal(b[l]));
    EXPECT_FALSE(a[l].bitwise_equal(c[l]));
  }
  EXPECT_FALSE(a[0].bitwise_equal(a[1]));
}

TEST(InitTest, UniformWithinFanInBound) {
  const auto p = init_params(ModelSpec::encoder_stack(1, 16, 64, 5), Precision::FP64)[0];
  for (double v : p.tensors[0].values()) EXPECT_LE(std::fabs(v), 0.25);
  for (double v : p.tensors[2].values()) EXPECT_LE(std::fabs(v), 0.125);
  EXPECT_EQ(unit_uniform(0), 0.0);
  EXPECT_LT(unit_uniform(~std::uint64_t{0}), 1.0);
}

}  // namespace
}  // namespace l2l
