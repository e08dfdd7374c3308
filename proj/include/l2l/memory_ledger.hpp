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

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "l2l/tensor.hpp"

namespace l2l {

enum class MemCategory {
  LayerWeights,
  ActivationStash,
  Gradients,
  TransitBuffer,
  Workspace,
};

inline constexpr std::size_t kMemCategoryCount = 5;

std::string_view to_string(MemCategory c);

enum class TransferDirection { HostToDevice, DeviceToHost };

struct TransferEvent {
  TransferDirection direction;
  std::uint64_t bytes;
  MemCategory label;
  std::uint64_t sequence_index;
};

// Opaque token for one live device allocation.
struct Allocation {
  std::uint64_t id = 0;
  MemCategory category = MemCategory::Workspace;
  std::uint64_t bytes = 0;
};

struct MemoryReport {
  std::uint64_t device_peak = 0;
  std::array<std::uint64_t, kMemCategoryCount> category_peak{};
  std::uint64_t host_peak = 0;
  std::uint64_t h2d_bytes = 0;
  std::uint64_t d2h_bytes = 0;
  std::array<std::uint64_t, kMemCategoryCount> h2d_by_label{};
  std::array<std::uint64_t, kMemCategoryCount> d2h_by_label{};
  std::uint64_t transfer_count = 0;

  std::uint64_t peak(MemCategory c) const {
    return category_peak[static_cast<std::size_t>(c)];
  }
  std::uint64_t h2d(MemCategory c) const {
    return h2d_by_label[static_cast<std::size_t>(c)];
  }
  std::uint64_t d2h(MemCategory c) const {
    return d2h_by_label[static_cast<std::size_t>(c)];
  }
};

// Byte-exact bookkeeping of a two-tier memory system. Device allocations are
// charged per category and checked against an optional budget; host bytes
// track activation-stash entries parked in host memory. Bytes are semantic
// (elements x precision width), with no allocator overhead.
class MemoryLedger {
 public:
  MemoryLedger() = default;
  explicit MemoryLedger(std::optional<std::uint64_t> device_budget)
      : budget_(device_budget) {}

  // Throws OutOfMemoryError when the budget would be exceeded.
  Allocation alloc(MemCategory category, std::uint64_t element_count,
                   Precision precision);
  Allocation alloc_bytes(MemCategory category, std::uint64_t bytes);
  // Throws UsageError on an unknown or already released handle.
  void release(const Allocation& handle);

  void record_transfer(TransferDirection direction, std::uint64_t bytes,
                       MemCategory label);

  std::optional<std::uint64_t> budget() const { return budget_; }
  std::uint64_t current(MemCategory c) const {
    return current_[static_cast<std::size_t>(c)];
  }
  std::uint64_t device_total() const { return total_; }
  std::uint64_t device_peak() const { return peak_; }
  std::uint64_t host_bytes() const { return host_bytes_; }
  std::size_t live_allocations() const { return live_.size(); }
  const std::vector<TransferEvent>& transfer_log() const { return log_; }

  // Summary of a finished run. Throws LeakError listing every category that
  // still holds bytes.
  MemoryReport report() const;

 private:
  std::optional<std::uint64_t> budget_;
  std::array<std::uint64_t, kMemCategoryCount> current_{};
  std::array<std::uint64_t, kMemCategoryCount> category_peak_{};
  std::uint64_t total_ = 0;
  std::uint64_t peak_ = 0;
  std::uint64_t host_bytes_ = 0;
  std::uint64_t host_peak_ = 0;
  std::uint64_t next_id_ = 1;
  std::unordered_map<std::uint64_t, Allocation> live_;
  std::vector<TransferEvent> log_;
};

// Combines per-worker reports: peaks take the maximum, transfers add up.
MemoryReport merge_reports(const std::vector<MemoryReport>& reports);

}  // namespace l2l
