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
#include <vector>

#include "l2l/tensor.hpp"

namespace l2l {

enum class LayerKind { EncoderBlock, Affine, LossHead };

// Static description of one layer. Encoder blocks are the feed-forward half of
// a transformer encoder with its residual connection:
//   y = x + gelu(x W1 + b1) W2 + b2
// The loss head is mean-squared error and owns no parameters.
struct LayerSpec {
  LayerKind kind = LayerKind::EncoderBlock;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t intermediate = 0;  // encoder blocks only

  static LayerSpec encoder_block(std::size_t hidden, std::size_t intermediate);
  static LayerSpec affine(std::size_t in, std::size_t out);
  static LayerSpec mse_loss_head(std::size_t width);

  std::uint64_t param_count() const;
  std::vector<std::vector<std::size_t>> param_shapes() const;
  std::vector<std::string> param_names() const;
  // Elements of within-layer intermediates kept by layer_forward per row.
  std::size_t residual_width() const;

  bool operator==(const LayerSpec&) const = default;
};

// Ordered stack of parameterized layers; the MSE loss head is implicit at the
// top. Input and output width are both `hidden`.
struct ModelSpec {
  std::vector<LayerSpec> layers;
  std::size_t hidden = 0;
  std::uint64_t seed = 1;

  static ModelSpec encoder_stack(std::size_t n_layers, std::size_t hidden,
                                 std::size_t intermediate, std::uint64_t seed);

  std::size_t depth() const { return layers.size(); }
  std::uint64_t param_count() const;
  // Throws DimensionError when adjacent widths do not chain.
  void validate() const;
};

// Parameter tensors of one layer, ordered as LayerSpec::param_names().
struct LayerParams {
  std::vector<Tensor> tensors;

  std::uint64_t element_count() const;
  std::uint64_t byte_size() const;
  LayerParams to_precision(Precision p) const;
  bool bitwise_equal(const LayerParams& other) const;
  bool same_shapes(const LayerParams& other) const;
};

// Elementwise a + b over matching parameter sets.
LayerParams add(const LayerParams& a, const LayerParams& b);
LayerParams zeros_like(const LayerParams& p);

// Within-layer activations produced by layer_forward. Safe to discard; a
// second layer_forward on the same input regenerates them bit for bit.
struct IntermediateCache {
  std::vector<std::size_t> input_shape;
  std::vector<Tensor> tensors;

  std::uint64_t element_count() const;
};

struct ForwardResult {
  Tensor y;
  IntermediateCache residuals;
};

struct BackwardResult {
  Tensor dx;
  LayerParams dparams;
};

ForwardResult layer_forward(const LayerSpec& spec, const LayerParams& params,
                            const Tensor& x);

BackwardResult layer_backward(const LayerSpec& spec, const LayerParams& params,
                              const Tensor& x,
                              const IntermediateCache& residuals,
                              const Tensor& dy);

struct LossResult {
  double loss = 0.0;
  Tensor dpred;
};

// loss = scale * mean((pred - target)^2), dpred = scale * 2 (pred - target)/n.
// `loss` is evaluated in double for reporting; dpred carries pred's precision.
LossResult loss_head(const Tensor& pred, const Tensor& target, double scale);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in being the width feeding
// the affine map a tensor belongs to. Each layer draws from its own stream so
// any layer can be regenerated independently.
std::vector<LayerParams> init_params(const ModelSpec& spec,
                                     Precision precision = Precision::FP32);
LayerParams init_layer_params(const LayerSpec& spec, std::uint64_t seed,
                              std::size_t layer_index, Precision precision);

// Uniform [0,1) double from a 64-bit draw; stable across standard libraries.
double unit_uniform(std::uint64_t bits);

}  // namespace l2l
