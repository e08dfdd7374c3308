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

#include <cmath>
#include <random>

#include "l2l/error.hpp"

namespace l2l {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_params(const LayerSpec& spec, const LayerParams& params) {
  const auto shapes = spec.param_shapes();
  if (params.tensors.size() != shapes.size()) {
    throw DimensionError("layer expects " + std::to_string(shapes.size()) +
                         " parameter tensors, got " +
                         std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params.tensors[i].shape() != shapes[i]) {
      throw DimensionError("parameter " + spec.param_names()[i] +
                           " has the wrong shape");
    }
  }
}

void check_input(const LayerSpec& spec, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != spec.in) {
    throw DimensionError("layer input width " + std::to_string(x.cols()) +
                         " does not match " + std::to_string(spec.in));
  }
}

}  // namespace

LayerSpec LayerSpec::encoder_block(std::size_t hidden,
                                   std::size_t intermediate) {
  if (hidden == 0 || intermediate == 0) {
    throw DimensionError("encoder block sizes must be positive");
  }
  return {LayerKind::EncoderBlock, hidden, hidden, intermediate};
}

LayerSpec LayerSpec::affine(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw DimensionError("affine sizes must be positive");
  return {LayerKind::Affine, in, out, 0};
}

LayerSpec LayerSpec::mse_loss_head(std::size_t width) {
  return {LayerKind::LossHead, width, width, 0};
}

std::uint64_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::EncoderBlock:
      return std::uint64_t{in} * intermediate + intermediate +
             std::uint64_t{intermediate} * out + out;
    case LayerKind::Affine:
      return std::uint64_t{in} * out + out;
    case LayerKind::LossHead:
      return 0;
  }
  return 0;
}

std::vector<std::vector<std::size_t>> LayerSpec::param_shapes() const {
  switch (kind) {
    case LayerKind::EncoderBlock:
      return {{in, intermediate}, {1, intermediate}, {intermediate, out}, {1, out}};
    case LayerKind::Affine:
      return {{in, out}, {1, out}};
    case LayerKind::LossHead:
      return {};
  }
  return {};
}

std::vector<std::string> LayerSpec::param_names() const {
  switch (kind) {
    case LayerKind::EncoderBlock:
      return {"W1", "b1", "W2", "b2"};
    case LayerKind::Affine:
      return {"W", "b"};
    case LayerKind::LossHead:
      return {};
  }
  return {};
}

std::size_t LayerSpec::residual_width() const {
  return kind == LayerKind::EncoderBlock ? 2 * intermediate : 0;
}

ModelSpec ModelSpec::encoder_stack(std::size_t n_layers, std::size_t hidden,
                                   std::size_t intermediate,
                                   std::uint64_t seed) {
  ModelSpec m;
  m.hidden = hidden;
  m.seed = seed;
  m.layers.assign(n_layers, LayerSpec::encoder_block(hidden, intermediate));
  m.validate();
  return m;
}

std::uint64_t ModelSpec::param_count() const {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

void ModelSpec::validate() const {
  if (layers.empty()) throw DimensionError("model has no layers");
  std::size_t width = hidden;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& spec = layers[l];
    if (spec.kind == LayerKind::LossHead) {
      throw DimensionError("loss head is implicit; layer " + std::to_string(l) +
                           " must carry parameters");
    }
    if (spec.in != width) {
      throw DimensionError("layer " + std::to_string(l) + " expects width " +
                           std::to_string(spec.in) + " but receives " +
                           std::to_string(width));
    }
    width = spec.out;
  }
  if (width != hidden) {
    throw DimensionError("model output width must equal hidden size");
  }
}

std::uint64_t LayerParams::element_count() const {
  std::uint64_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

std::uint64_t LayerParams::byte_size() const {
  std::uint64_t n = 0;
  for (const auto& t : tensors) n += t.byte_size();
  return n;
}

LayerParams LayerParams::to_precision(Precision p) const {
  LayerParams out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back(t.to_precision(p));
  return out;
}

bool LayerParams::bitwise_equal(const LayerParams& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].bitwise_equal(other.tensors[i])) return false;
  return true;
}

bool LayerParams::same_shapes(const LayerParams& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].same_shape(other.tensors[i])) return false;
  return true;
}

LayerParams add(const LayerParams& a, const LayerParams& b) {
  if (!a.same_shapes(b)) throw DimensionError("parameter sets differ in shape");
  LayerParams out;
  out.tensors.reserve(a.tensors.size());
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    out.tensors.push_back(add(a.tensors[i], b.tensors[i]));
  return out;
}

LayerParams zeros_like(const LayerParams& p) {
  LayerParams out;
  for (const auto& t : p.tensors) out.tensors.emplace_back(t.shape(), t.precision());
  return out;
}

std::uint64_t IntermediateCache::element_count() const {
  std::uint64_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

ForwardResult layer_forward(const LayerSpec& spec, const LayerParams& params,
                            const Tensor& x) {
  check_params(spec, params);
  check_input(spec, x);
  const auto& w = params.tensors;
  switch (spec.kind) {
    case LayerKind::EncoderBlock: {
      Tensor pre = add_row_bias(matmul(x, w[0]), w[1]);
      Tensor act = gelu(pre);
      Tensor y = add(x, add_row_bias(matmul(act, w[2]), w[3]));
      return {std::move(y), {x.shape(), {std::move(pre), std::move(act)}}};
    }
    case LayerKind::Affine:
      return {add_row_bias(matmul(x, w[0]), w[1]), {x.shape(), {}}};
    case LayerKind::LossHead:
      break;
  }
  throw UsageError("loss head has no layer_forward; use loss_head");
}

BackwardResult layer_backward(const LayerSpec& spec, const LayerParams& params,
                              const Tensor& x,
                              const IntermediateCache& residuals,
                              const Tensor& dy) {
  check_params(spec, params);
  check_input(spec, x);
  if (residuals.input_shape != x.shape()) {
    throw ConsistencyError("residuals were produced for a different input");
  }
  if (dy.rows() != x.rows() || dy.cols() != spec.out) {
    throw DimensionError("output cotangent has the wrong shape");
  }
  const auto& w = params.tensors;
  switch (spec.kind) {
    case LayerKind::EncoderBlock: {
      if (residuals.tensors.size() != 2 ||
          residuals.tensors[0].rows() != x.rows()) {
        throw ConsistencyError("stale encoder residuals");
      }
      const Tensor& pre = residuals.tensors[0];
      const Tensor& act = residuals.tensors[1];
      Tensor d_w2 = matmul(transpose(act), dy);
      Tensor d_b2 = column_sum(dy);
      Tensor d_act = matmul(dy, transpose(w[2]));
      Tensor d_pre = hadamard(d_act, gelu_grad(pre));
      Tensor d_w1 = matmul(transpose(x), d_pre);
      Tensor d_b1 = column_sum(d_pre);
      Tensor dx = add(dy, matmul(d_pre, transpose(w[0])));
      return {std::move(dx),
              {{std::move(d_w1), std::move(d_b1), std::move(d_w2),
                std::move(d_b2)}}};
    }
    case LayerKind::Affine: {
      Tensor d_w = matmul(transpose(x), dy);
      Tensor d_b = column_sum(dy);
      return {matmul(dy, transpose(w[0])), {{std::move(d_w), std::move(d_b)}}};
    }
    case LayerKind::LossHead:
      break;
  }
  throw UsageError("loss head has no layer_backward; use loss_head");
}

LossResult loss_head(const Tensor& pred, const Tensor& target, double scale) {
  if (!pred.same_shape(target)) {
    throw DimensionError("loss head: prediction and target shapes differ");
  }
  if (!(scale > 0.0)) throw UsageError("loss head: scale must be positive");
  const Tensor diff = sub(pred, target.to_precision(pred.precision()));
  const double n = static_cast<double>(diff.size());
  double sum_sq = 0.0;
  for (double d : diff.values()) sum_sq += d * d;
  const double coefficient = scale * 2.0 / n;
  return {scale * (sum_sq / n), l2l::scale(diff, coefficient)};
}

double unit_uniform(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

LayerParams init_layer_params(const LayerSpec& spec, std::uint64_t seed,
                              std::size_t layer_index, Precision precision) {
  std::mt19937_64 gen(splitmix64(seed ^ splitmix64(layer_index + 1)));
  LayerParams out;
  const auto shapes = spec.param_shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    // Tensors come in (weight, bias) pairs; both share the pair's fan-in.
    const std::size_t fan_in = shapes[i - i % 2][0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::size_t n = 1;
    for (std::size_t d : shapes[i]) n *= d;
    std::vector<double> v(n);
    for (double& e : v) e = (2.0 * unit_uniform(gen()) - 1.0) * bound;
    out.tensors.push_back(Tensor::from_values(shapes[i], std::move(v), precision));
  }
  return out;
}

std::vector<LayerParams> init_params(const ModelSpec& spec,
                                     Precision precision) {
  spec.validate();
  std::vector<LayerParams> out;
  out.reserve(spec.layers.size());
  for (std::size_t l = 0; l < spec.layers.size(); ++l)
    out.push_back(init_layer_params(spec.layers[l], spec.seed, l, precision));
  return out;
}

}  // namespace l2l
