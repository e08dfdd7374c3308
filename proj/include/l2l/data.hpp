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
#include <vector>

#include "l2l/layers.hpp"
#include "l2l/tensor.hpp"

namespace l2l {

// One optimizer step worth of samples, FP64, rows = total batch.
struct Minibatch {
  Tensor inputs;
  Tensor targets;
};

class DataSource {
 public:
  virtual ~DataSource() = default;
  // Deterministic in (step, rows).
  virtual Minibatch minibatch(std::size_t step, std::size_t rows) const = 0;
};

// Synthetic regression task: inputs uniform in [-1, 1], targets are the
// outputs of a fixed teacher encoder stack plus small uniform noise. Teacher
// and inputs derive from the seed only, so a (seed, step) pair always yields
// the same minibatch.
class TeacherTask : public DataSource {
 public:
  TeacherTask(const ModelSpec& student, std::uint64_t seed,
              double noise = 0.01);

  Minibatch minibatch(std::size_t step, std::size_t rows) const override;

  const ModelSpec& teacher() const { return teacher_; }

 private:
  ModelSpec teacher_;
  std::vector<LayerParams> teacher_params_;
  std::uint64_t seed_;
  double noise_;
};

// Replays explicit minibatches; step i uses entry i modulo the list length.
class FixedData : public DataSource {
 public:
  explicit FixedData(std::vector<Minibatch> batches)
      : batches_(std::move(batches)) {}

  Minibatch minibatch(std::size_t step, std::size_t rows) const override;

 private:
  std::vector<Minibatch> batches_;
};

}  // namespace l2l
