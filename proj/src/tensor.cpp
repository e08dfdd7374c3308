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

#include "l2l/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numbers>
#include <sstream>

#include "l2l/error.hpp"

namespace l2l {

namespace {

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void require_same_precision(const Tensor& a, const Tensor& b,
                            const char* op) {
  if (a.precision() != b.precision()) {
    throw UsageError(std::string(op) + ": precision mismatch (" +
                     std::string(to_string(a.precision())) + " vs " +
                     std::string(to_string(b.precision())) + ")");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  require_same_precision(a, b, op);
}

template <typename Fn>
Tensor map_unary(const Tensor& a, Fn fn) {
  std::vector<double> out(a.size());
  auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(in[i]);
  return Tensor::from_values(a.shape(), std::move(out), a.precision());
}

template <typename Fn>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, Fn fn) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.size());
  auto x = a.values();
  auto y = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(x[i], y[i]);
  return Tensor::from_values(a.shape(), std::move(out), a.precision());
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::FP64:
      return "fp64";
    case Precision::FP32:
      return "fp32";
    case Precision::SimFP16:
      return "fp16";
  }
  return "?";
}

double quantize_binary16(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  if (ax >= kBinary16Max) return std::copysign(kBinary16Max, x);
  // Spacing of binary16 values around |x|: 2^-24 in the subnormal range,
  // otherwise 2^(e-11) for |x| in [2^(e-1), 2^e).
  double ulp = std::ldexp(1.0, -24);
  if (ax >= std::ldexp(1.0, -14)) {
    int e = 0;
    std::frexp(ax, &e);
    ulp = std::ldexp(1.0, e - 11);
  }
  const double r = std::nearbyint(ax / ulp) * ulp;
  return std::copysign(r, x);
}

double round_to(double x, Precision p) {
  switch (p) {
    case Precision::FP64:
      return x;
    case Precision::FP32:
      return static_cast<double>(static_cast<float>(x));
    case Precision::SimFP16:
      return quantize_binary16(x);
  }
  return x;
}

Tensor::Tensor(std::vector<std::size_t> shape, Precision precision)
    : shape_(std::move(shape)), precision_(precision) {
  data_.assign(element_count(shape_), 0.0);
}

Tensor Tensor::from_values(std::vector<std::size_t> shape,
                           std::vector<double> values, Precision precision) {
  if (values.size() != element_count(shape)) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.precision_ = precision;
  if (precision != Precision::FP64) {
    for (double& v : values) v = round_to(v, precision);
  }
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, Precision precision) {
  return Tensor({rows, cols}, precision);
}

Tensor Tensor::identity(std::size_t n, Precision precision) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return from_values({n, n}, std::move(v), precision);
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() != 2) throw DimensionError("expected a rank-2 tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() != 2) throw DimensionError("expected a rank-2 tensor");
  return shape_[1];
}

Tensor Tensor::to_precision(Precision p) const {
  return from_values(shape_, data_, p);
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  if (shape_ != other.shape_ || precision_ != other.precision_) return false;
  return std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(double)) == 0;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_precision(a, b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  auto x = a.values();
  auto y = b.values();
  std::vector<double> out(m * n);
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    // p outermost keeps the per-element summation order p = 0, 1, ..., k-1.
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      const double* row = &y[p * n];
      for (std::size_t j = 0; j < n; ++j) acc[j] += xv * row[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = acc[j];
  }
  return Tensor::from_values({m, n}, std::move(out), a.precision());
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  auto x = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return Tensor::from_values({n, m}, std::move(out), a.precision());
}

Tensor add(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "add", std::plus<>{});
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "sub", std::minus<>{});
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "hadamard", std::multiplies<>{});
}

Tensor scale(const Tensor& a, double s) {
  return map_unary(a, [s](double v) { return v * s; });
}

double gelu_scalar(double x) { return x * normal_cdf(x); }

double gelu_grad_scalar(double x) { return normal_cdf(x) + x * normal_pdf(x); }

Tensor gelu(const Tensor& a) { return map_unary(a, gelu_scalar); }

Tensor gelu_grad(const Tensor& a) { return map_unary(a, gelu_grad_scalar); }

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
  require_same_precision(a, bias, "add_row_bias");
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.size() != n) {
    throw DimensionError("add_row_bias: bias width " +
                         std::to_string(bias.size()) + " vs " +
                         std::to_string(n) + " columns");
  }
  auto x = a.values();
  auto b = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + b[j];
  return Tensor::from_values(a.shape(), std::move(out), a.precision());
}

Tensor column_sum(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  auto x = a.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x[i * n + j];
  return Tensor::from_values({1, n}, std::move(out), a.precision());
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  const std::size_t n = a.cols();
  if (count == 0 || begin + count > a.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " +
                         std::to_string(a.rows()));
  }
  auto x = a.values();
  std::vector<double> out(x.begin() + begin * n,
                          x.begin() + (begin + count) * n);
  return Tensor::from_values({count, n}, std::move(out), a.precision());
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t n = parts.front().cols();
  std::size_t rows = 0;
  std::vector<double> out;
  for (const Tensor& t : parts) {
    if (t.cols() != n) throw DimensionError("concat_rows: column mismatch");
    require_same_precision(parts.front(), t, "concat_rows");
    rows += t.rows();
    out.insert(out.end(), t.values().begin(), t.values().end());
  }
  return Tensor::from_values({rows, n}, std::move(out),
                             parts.front().precision());
}

}  // namespace l2l
