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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace l2l {

// Storage precision of a tensor. Values are always held as doubles; the tag
// constrains them to the representable set of the named format and decides
// how many bytes the memory ledger charges per element.
enum class Precision { FP64, FP32, SimFP16 };

constexpr std::size_t bytes_per_element(Precision p) {
  switch (p) {
    case Precision::FP64:
      return 8;
    case Precision::FP32:
      return 4;
    case Precision::SimFP16:
      return 2;
  }
  return 0;
}

std::string_view to_string(Precision p);

// Largest finite binary16 magnitude.
inline constexpr double kBinary16Max = 65504.0;

// Nearest binary16 value (ties to even). Magnitudes above kBinary16Max,
// infinities included, saturate to +-kBinary16Max; NaN propagates; binary16
// subnormals are kept.
double quantize_binary16(double x);

// Rounds a real value into the representable set of `p`.
double round_to(double x, Precision p);

// Dense row-major tensor. Immutable once built: every operation returns a
// new tensor and rounds each produced element to the operand precision.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor.
  Tensor(std::vector<std::size_t> shape, Precision precision);

  // Values are rounded into `precision` on the way in.
  static Tensor from_values(std::vector<std::size_t> shape,
                            std::vector<double> values, Precision precision);
  static Tensor zeros(std::size_t rows, std::size_t cols, Precision precision);
  static Tensor identity(std::size_t n, Precision precision);

  const std::vector<std::size_t>& shape() const { return shape_; }
  Precision precision() const { return precision_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  // Rank-2 helpers; a rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return data_; }
  double at(std::size_t i) const { return data_[i]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  std::uint64_t byte_size() const {
    return static_cast<std::uint64_t>(size()) * bytes_per_element(precision_);
  }

  // Re-rounds every element into `p`. Widening is exact.
  Tensor to_precision(Precision p) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Bitwise equality of shape, precision and every element.
  bool bitwise_equal(const Tensor& other) const;

 private:
  std::vector<std::size_t> shape_;
  Precision precision_ = Precision::FP32;
  std::vector<double> data_;
};

// c[i,j] = sum_p a[i,p] * b[p,j], accumulated left to right in double and
// rounded once into the operand precision.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Exact GELU: x * Phi(x), Phi the standard normal CDF.
Tensor gelu(const Tensor& a);
// d/dx gelu(x) = Phi(x) + x * phi(x).
Tensor gelu_grad(const Tensor& a);

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Adds a 1 x cols bias to every row of `a`.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);
// Sums the rows of `a` into a 1 x cols tensor, top to bottom.
Tensor column_sum(const Tensor& a);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);

}  // namespace l2l
