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

#include "l2l/eps.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "l2l/error.hpp"

namespace l2l {

namespace {

// Elementwise map into precision p over a parameter set.
template <typename Fn>
LayerParams map_params(const LayerParams& a, Precision p, Fn fn) {
  LayerParams out;
  out.tensors.reserve(a.tensors.size());
  for (const auto& t : a.tensors) {
    std::vector<double> v(t.size());
    auto x = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(x[i]);
    out.tensors.push_back(Tensor::from_values(t.shape(), std::move(v), p));
  }
  return out;
}

void check_layer(std::size_t l, std::size_t depth) {
  if (l >= depth) {
    throw UsageError("layer index " + std::to_string(l) + " out of range [0, " +
                     std::to_string(depth) + ")");
  }
}

std::uint32_t float_bits_le(float f) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) {
    bits = ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) |
           ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
  return bits;
}

std::size_t first_intermediate(const ModelSpec& m) {
  for (const auto& l : m.layers)
    if (l.kind == LayerKind::EncoderBlock) return l.intermediate;
  return 0;
}

}  // namespace

std::string_view to_string(PolicyTag t) {
  switch (t) {
    case PolicyTag::FP64:
      return "fp64";
    case PolicyTag::FP32:
      return "fp32";
    case PolicyTag::CMP:
      return "cmp";
  }
  return "?";
}

Precision PrecisionPolicy::device_precision() const {
  switch (tag) {
    case PolicyTag::FP64:
      return Precision::FP64;
    case PolicyTag::FP32:
      return Precision::FP32;
    case PolicyTag::CMP:
      return quantizer == Quantizer::Binary16 ? Precision::SimFP16
                                              : Precision::FP32;
  }
  return Precision::FP32;
}

std::size_t PrecisionPolicy::device_bytes_per_element() const {
  switch (tag) {
    case PolicyTag::FP64:
      return 8;
    case PolicyTag::FP32:
      return 4;
    case PolicyTag::CMP:
      return 2;
  }
  return 4;
}

void DeviceLayer::make_resident(MemoryLedger& ledger) {
  if (released_) throw UsageError("device layer already released");
  if (resident_) return;
  ledger.release(allocation_);
  allocation_ = ledger.alloc_bytes(MemCategory::LayerWeights, allocation_.bytes);
  resident_ = true;
}

void DeviceLayer::release(MemoryLedger& ledger) {
  if (released_) throw UsageError("device layer released twice");
  ledger.release(allocation_);
  released_ = true;
}

bool EpsSnapshot::bitwise_equal(const EpsSnapshot& other) const {
  if (master.size() != other.master.size()) return false;
  for (std::size_t l = 0; l < master.size(); ++l)
    if (!master[l].bitwise_equal(other.master[l])) return false;
  return true;
}

EpsStore::EpsStore(const ModelSpec& model, PrecisionPolicy policy,
                   OptimizerConfig optimizer, std::size_t worker_count)
    : EpsStore(model, init_params(model, Precision::FP64), policy, optimizer,
               worker_count) {}

EpsStore::EpsStore(const ModelSpec& model, std::vector<LayerParams> master,
                   PrecisionPolicy policy, OptimizerConfig optimizer,
                   std::size_t worker_count)
    : model_(model),
      policy_(policy),
      optimizer_(optimizer),
      worker_count_(worker_count) {
  model_.validate();
  if (worker_count_ == 0) throw PlanError("worker count must be positive");
  if (master.size() != model_.depth()) {
    throw DimensionError("master parameter list does not match model depth");
  }
  const Precision mp = policy_.master_precision();
  for (std::size_t l = 0; l < master.size(); ++l) {
    auto shapes = model_.layers[l].param_shapes();
    if (master[l].tensors.size() != shapes.size()) {
      throw DimensionError("master layer " + std::to_string(l) +
                           " has the wrong tensor count");
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (master[l].tensors[i].shape() != shapes[i]) {
        throw DimensionError("master layer " + std::to_string(l) +
                             " has a mis-shaped tensor");
      }
    }
    master_.push_back(master[l].to_precision(mp));
  }
  last_gradient_.resize(master_.size());
  reduce_.resize(master_.size());
  for (auto& r : reduce_) r.pending.resize(worker_count_);
  stepped_.assign(master_.size(), false);
  for (std::size_t l = 0; l < master_.size(); ++l) {
    layer_locks_.push_back(std::make_unique<std::mutex>());
    if (optimizer_.kind == OptimizerKind::Adam) {
      adam_.push_back({zeros_like(master_[l]), zeros_like(master_[l]), 0});
    }
  }
}

const LayerParams& EpsStore::master(std::size_t l) const {
  check_layer(l, depth());
  return master_[l];
}

const LayerParams& EpsStore::last_gradient(std::size_t l) const {
  check_layer(l, depth());
  return last_gradient_[l];
}

std::size_t EpsStore::contributions(std::size_t l) const {
  check_layer(l, depth());
  std::lock_guard lock(*layer_locks_[l]);
  return reduce_[l].received;
}

DeviceLayer EpsStore::fetch_layer(std::size_t l, MemoryLedger& ledger) const {
  check_layer(l, depth());
  LayerParams device = master_[l].to_precision(policy_.device_precision());
  const std::uint64_t bytes =
      device.element_count() * policy_.device_bytes_per_element();
  Allocation handle;
  try {
    handle = ledger.alloc_bytes(MemCategory::TransitBuffer, bytes);
  } catch (const OutOfMemoryError& e) {
    // The transit buffer holds layer weights in flight.
    throw OutOfMemoryError(std::string(to_string(MemCategory::LayerWeights)),
                           e.requested(), e.in_use(), e.budget());
  }
  ledger.record_transfer(TransferDirection::HostToDevice, bytes,
                         MemCategory::LayerWeights);
  return DeviceLayer(l, std::move(device), handle);
}

void EpsStore::push_gradients(std::size_t l, std::size_t worker_id,
                              const LayerParams& grads, MemoryLedger& ledger,
                              std::optional<Allocation> device_grads) {
  check_layer(l, depth());
  if (worker_id >= worker_count_) {
    throw ProtocolError("worker id " + std::to_string(worker_id) +
                        " outside [0, " + std::to_string(worker_count_) + ")");
  }
  if (!grads.same_shapes(master_[l])) {
    throw DimensionError("gradient shapes do not match layer " +
                         std::to_string(l));
  }
  {
    std::lock_guard lock(*layer_locks_[l]);
    Reduction& r = reduce_[l];
    if (worker_id < r.next_worker || r.pending[worker_id].has_value()) {
      throw ProtocolError("worker " + std::to_string(worker_id) +
                          " already contributed to layer " + std::to_string(l));
    }
    r.pending[worker_id] = grads.to_precision(policy_.master_precision());
    ++r.received;
    while (r.next_worker < worker_count_ && r.pending[r.next_worker]) {
      LayerParams& g = *r.pending[r.next_worker];
      r.accumulator = r.accumulator ? add(*r.accumulator, g) : std::move(g);
      r.pending[r.next_worker].reset();
      ++r.next_worker;
    }
  }
  ledger.record_transfer(TransferDirection::DeviceToHost,
                         grads.element_count() * policy_.device_bytes_per_element(),
                         MemCategory::Gradients);
  if (device_grads) ledger.release(*device_grads);
}

void EpsStore::reduce_and_step(std::size_t l) {
  check_layer(l, depth());
  std::lock_guard lock(*layer_locks_[l]);
  Reduction& r = reduce_[l];
  if (r.received != worker_count_ || !r.accumulator) {
    throw NotReadyError("layer " + std::to_string(l) + " has " +
                        std::to_string(r.received) + " of " +
                        std::to_string(worker_count_) + " contributions");
  }
  const Precision mp = policy_.master_precision();
  const double k = static_cast<double>(worker_count_);
  LayerParams mean = worker_count_ == 1
                         ? std::move(*r.accumulator)
                         : map_params(*r.accumulator, mp,
                                      [k](double g) { return g / k; });
  r.accumulator.reset();
  r.next_worker = 0;
  r.received = 0;

  apply_optimizer(l, mean);
  last_gradient_[l] = std::move(mean);

  stepped_[l] = true;
  bool all = true;
  for (bool s : stepped_) all = all && s;
  if (all) {
    ++version_;
    stepped_.assign(stepped_.size(), false);
  }
}

void EpsStore::step_all() {
  for (std::size_t l = 0; l < depth(); ++l) reduce_and_step(l);
}

void EpsStore::apply_optimizer(std::size_t l, const LayerParams& grad) {
  const Precision p = policy_.master_precision();
  auto r = [p](double x) { return round_to(x, p); };
  const double lr = r(optimizer_.lr);
  LayerParams& w = master_[l];

  if (optimizer_.kind == OptimizerKind::SGD) {
    for (std::size_t i = 0; i < w.tensors.size(); ++i) {
      auto wv = w.tensors[i].values();
      auto gv = grad.tensors[i].values();
      std::vector<double> out(wv.size());
      for (std::size_t e = 0; e < out.size(); ++e)
        out[e] = r(wv[e] - r(lr * gv[e]));
      w.tensors[i] = Tensor::from_values(w.tensors[i].shape(), std::move(out), p);
    }
    return;
  }

  // Adam with bias-corrected moments.
  AdamState& st = adam_[l];
  ++st.step;
  const double b1 = r(optimizer_.beta1);
  const double b2 = r(optimizer_.beta2);
  const double eps = r(optimizer_.epsilon);
  const double c1 = r(1.0 - std::pow(b1, static_cast<double>(st.step)));
  const double c2 = r(1.0 - std::pow(b2, static_cast<double>(st.step)));
  for (std::size_t i = 0; i < w.tensors.size(); ++i) {
    auto wv = w.tensors[i].values();
    auto gv = grad.tensors[i].values();
    auto mv = st.m.tensors[i].values();
    auto vv = st.v.tensors[i].values();
    const std::size_t n = wv.size();
    std::vector<double> w_out(n), m_out(n), v_out(n);
    for (std::size_t e = 0; e < n; ++e) {
      const double g = gv[e];
      m_out[e] = r(r(b1 * mv[e]) + r(r(1.0 - b1) * g));
      v_out[e] = r(r(b2 * vv[e]) + r(r(r(1.0 - b2) * g) * g));
      const double m_hat = r(m_out[e] / c1);
      const double v_hat = r(v_out[e] / c2);
      const double denom = r(r(std::sqrt(v_hat)) + eps);
      w_out[e] = r(wv[e] - r(r(lr * m_hat) / denom));
    }
    const auto& shape = w.tensors[i].shape();
    w.tensors[i] = Tensor::from_values(shape, std::move(w_out), p);
    st.m.tensors[i] = Tensor::from_values(shape, std::move(m_out), p);
    st.v.tensors[i] = Tensor::from_values(shape, std::move(v_out), p);
  }
}

EpsSnapshot EpsStore::snapshot() const { return {master_, version_}; }

void EpsStore::write_dump(std::ostream& os) const {
  os << "l2l-eps v1 N=" << depth() << " H=" << model_.hidden
     << " I=" << first_intermediate(model_) << '\n';
  for (const auto& layer : master_) {
    for (const auto& t : layer.tensors) {
      for (double v : t.values()) {
        const std::uint32_t bits = float_bits_le(static_cast<float>(v));
        char buf[4];
        std::memcpy(buf, &bits, 4);
        os.write(buf, 4);
      }
    }
  }
}

void EpsStore::save_dump(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw UsageError("cannot open " + path + " for writing");
  write_dump(os);
}

EpsDump read_eps_dump(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConsistencyError("empty EPS dump");
  EpsDump d;
  if (std::sscanf(header.c_str(), "l2l-eps v1 N=%zu H=%zu I=%zu", &d.n_layers,
                  &d.hidden, &d.intermediate) != 3) {
    throw ConsistencyError("bad EPS dump header: " + header);
  }
  char buf[4];
  while (is.read(buf, 4)) {
    std::uint32_t bits;
    std::memcpy(&bits, buf, 4);
    if constexpr (std::endian::native == std::endian::big) {
      bits = float_bits_le(std::bit_cast<float>(bits));
    }
    d.values.push_back(std::bit_cast<float>(bits));
  }
  if (is.gcount() != 0) throw ConsistencyError("truncated EPS dump");
  return d;
}

EpsDump load_eps_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot open " + path);
  return read_eps_dump(is);
}

}  // namespace l2l
