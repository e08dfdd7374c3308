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
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "l2l/layers.hpp"
#include "l2l/memory_ledger.hpp"

namespace l2l {

enum class PolicyTag {
  FP64,  // oracle precision: master and device both in double
  FP32,
  CMP,   // cross mixed precision: binary16 on device, FP32 master on host
};

enum class Quantizer { Binary16, Identity };

std::string_view to_string(PolicyTag t);

// How master weights map to device tensors. Under CMP the master copy and
// the optimizer stay in FP32 while everything on the device is binary16.
struct PrecisionPolicy {
  PolicyTag tag = PolicyTag::FP32;
  // CMP only. Identity keeps device values in FP32 while still charging
  // binary16 bytes; it isolates the effect of quantization in tests.
  Quantizer quantizer = Quantizer::Binary16;

  static PrecisionPolicy fp64() { return {PolicyTag::FP64, Quantizer::Binary16}; }
  static PrecisionPolicy fp32() { return {PolicyTag::FP32, Quantizer::Binary16}; }
  static PrecisionPolicy cmp() { return {PolicyTag::CMP, Quantizer::Binary16}; }
  static PrecisionPolicy cmp_unquantized() {
    return {PolicyTag::CMP, Quantizer::Identity};
  }

  Precision master_precision() const {
    return tag == PolicyTag::FP64 ? Precision::FP64 : Precision::FP32;
  }
  Precision device_precision() const;
  std::size_t device_bytes_per_element() const;
};

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SGD;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerConfig sgd(double lr) { return {OptimizerKind::SGD, lr}; }
  static OptimizerConfig adam(double lr, double beta1 = 0.9,
                              double beta2 = 0.999, double epsilon = 1e-8) {
    return {OptimizerKind::Adam, lr, beta1, beta2, epsilon};
  }
};

// A layer's weights as they sit on the device. Fetching lands them in the
// transit buffer; make_resident() turns that buffer into the executing
// layer's weights.
class DeviceLayer {
 public:
  DeviceLayer(std::size_t index, LayerParams params, Allocation allocation)
      : index_(index), params_(std::move(params)), allocation_(allocation) {}

  std::size_t index() const { return index_; }
  const LayerParams& params() const { return params_; }
  bool resident() const { return resident_; }

  void make_resident(MemoryLedger& ledger);
  void release(MemoryLedger& ledger);

 private:
  std::size_t index_;
  LayerParams params_;
  Allocation allocation_;
  bool resident_ = false;
  bool released_ = false;
};

struct EpsSnapshot {
  std::vector<LayerParams> master;
  std::uint64_t version = 0;

  bool bitwise_equal(const EpsSnapshot& other) const;
};

// Eager Param-Server. Holds the master parameters and optimizer state on the
// host, accepts per-layer gradient contributions from workers as soon as a
// layer's backward finishes, and steps each layer independently.
//
// Contributions to one layer are folded in ascending worker id whatever the
// arrival order: a contribution that arrives early waits until every lower
// worker id has been folded. Pushes to different layers may run concurrently;
// pushes to the same layer are serialized by a per-layer lock.
class EpsStore {
 public:
  EpsStore(const ModelSpec& model, PrecisionPolicy policy,
           OptimizerConfig optimizer, std::size_t worker_count = 1);
  // Starts from explicit master values (converted to the master precision).
  EpsStore(const ModelSpec& model, std::vector<LayerParams> master,
           PrecisionPolicy policy, OptimizerConfig optimizer,
           std::size_t worker_count = 1);

  EpsStore(const EpsStore&) = delete;
  EpsStore& operator=(const EpsStore&) = delete;

  const ModelSpec& model() const { return model_; }
  std::size_t depth() const { return master_.size(); }
  const PrecisionPolicy& policy() const { return policy_; }
  const OptimizerConfig& optimizer() const { return optimizer_; }
  std::size_t worker_count() const { return worker_count_; }
  std::uint64_t version() const { return version_; }

  const LayerParams& master(std::size_t l) const;
  // Mean gradient applied by the most recent step of layer l.
  const LayerParams& last_gradient(std::size_t l) const;
  std::size_t contributions(std::size_t l) const;

  // Converts master[l] to the device precision, records the host-to-device
  // transfer and charges the transit buffer.
  DeviceLayer fetch_layer(std::size_t l, MemoryLedger& ledger) const;

  // Widens `grads` to the master precision and folds it into layer l's
  // accumulator. Records the device-to-host transfer and releases
  // `device_grads` if given.
  void push_gradients(std::size_t l, std::size_t worker_id,
                      const LayerParams& grads, MemoryLedger& ledger,
                      std::optional<Allocation> device_grads = std::nullopt);

  // Mean over workers, then one optimizer step on layer l. The version
  // counter advances once every layer has stepped.
  void reduce_and_step(std::size_t l);
  void step_all();

  EpsSnapshot snapshot() const;

  // Flat dump: text header "l2l-eps v1 N=<N> H=<H> I=<I>\n" followed by the
  // master values as little-endian FP32, layer-major, tensors in parameter
  // order, row-major within a tensor.
  void write_dump(std::ostream& os) const;
  void save_dump(const std::string& path) const;

 private:
  struct Reduction {
    std::optional<LayerParams> accumulator;
    std::vector<std::optional<LayerParams>> pending;  // by worker id
    std::size_t next_worker = 0;
    std::size_t received = 0;
  };

  struct AdamState {
    LayerParams m;
    LayerParams v;
    std::uint64_t step = 0;
  };

  void apply_optimizer(std::size_t l, const LayerParams& grad);

  ModelSpec model_;
  PrecisionPolicy policy_;
  OptimizerConfig optimizer_;
  std::size_t worker_count_;
  std::vector<LayerParams> master_;
  std::vector<LayerParams> last_gradient_;
  std::vector<Reduction> reduce_;
  std::vector<AdamState> adam_;
  std::vector<bool> stepped_;
  std::vector<std::unique_ptr<std::mutex>> layer_locks_;
  std::uint64_t version_ = 0;
};

struct EpsDump {
  std::size_t n_layers = 0;
  std::size_t hidden = 0;
  std::size_t intermediate = 0;
  std::vector<float> values;
};

EpsDump read_eps_dump(std::istream& is);
EpsDump load_eps_dump(const std::string& path);

}  // namespace l2l
