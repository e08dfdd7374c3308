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

#include "l2l/data.hpp"

#include <random>

#include "l2l/error.hpp"

namespace l2l {

namespace {

constexpr std::uint64_t kTeacherSalt = 0x7eac4e5ULL;
constexpr std::uint64_t kInputSalt = 0xda7aULL;

}  // namespace

TeacherTask::TeacherTask(const ModelSpec& student, std::uint64_t seed,
                         double noise)
    : teacher_(student), seed_(seed), noise_(noise) {
  teacher_.seed = seed ^ kTeacherSalt;
  teacher_params_ = init_params(teacher_, Precision::FP64);
}

Minibatch TeacherTask::minibatch(std::size_t step, std::size_t rows) const {
  const std::size_t h = teacher_.hidden;
  std::seed_seq seq{seed_, kInputSalt, static_cast<std::uint64_t>(step)};
  std::mt19937_64 gen(seq);
  std::vector<double> x(rows * h);
  for (double& v : x) v = 2.0 * unit_uniform(gen()) - 1.0;
  Tensor inputs = Tensor::from_values({rows, h}, std::move(x), Precision::FP64);

  Tensor y = inputs;
  for (std::size_t l = 0; l < teacher_.depth(); ++l)
    y = layer_forward(teacher_.layers[l], teacher_params_[l], y).y;

  std::vector<double> t(y.values().begin(), y.values().end());
  for (double& v : t) v += noise_ * (2.0 * unit_uniform(gen()) - 1.0);
  return {std::move(inputs),
          Tensor::from_values({rows, h}, std::move(t), Precision::FP64)};
}

Minibatch FixedData::minibatch(std::size_t step, std::size_t rows) const {
  if (batches_.empty()) throw PlanError("fixed data source is empty");
  const Minibatch& b = batches_[step % batches_.size()];
  if (b.inputs.rows() != rows || b.targets.rows() != rows) {
    throw PlanError("fixed minibatch has " + std::to_string(b.inputs.rows()) +
                    " rows, plan needs " + std::to_string(rows));
  }
  return b;
}

}  // namespace l2l
