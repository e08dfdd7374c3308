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

#include "l2l/memory_ledger.hpp"

#include <algorithm>
#include <string>

#include "l2l/error.hpp"

namespace l2l {

std::string_view to_string(MemCategory c) {
  switch (c) {
    case MemCategory::LayerWeights:
      return "layer_weights";
    case MemCategory::ActivationStash:
      return "activation_stash";
    case MemCategory::Gradients:
      return "gradients";
    case MemCategory::TransitBuffer:
      return "transit_buffer";
    case MemCategory::Workspace:
      return "workspace";
  }
  return "?";
}

Allocation MemoryLedger::alloc(MemCategory category,
                               std::uint64_t element_count,
                               Precision precision) {
  if (element_count == 0) {
    throw UsageError("allocation of zero elements in " +
                     std::string(to_string(category)));
  }
  return alloc_bytes(category, element_count * bytes_per_element(precision));
}

Allocation MemoryLedger::alloc_bytes(MemCategory category,
                                     std::uint64_t bytes) {
  if (bytes == 0) {
    throw UsageError("allocation of zero bytes in " +
                     std::string(to_string(category)));
  }
  if (budget_ && total_ + bytes > *budget_) {
    throw OutOfMemoryError(std::string(to_string(category)), bytes, total_,
                           *budget_);
  }
  const auto idx = static_cast<std::size_t>(category);
  current_[idx] += bytes;
  total_ += bytes;
  category_peak_[idx] = std::max(category_peak_[idx], current_[idx]);
  peak_ = std::max(peak_, total_);
  Allocation handle{next_id_++, category, bytes};
  live_.emplace(handle.id, handle);
  return handle;
}

void MemoryLedger::release(const Allocation& handle) {
  auto it = live_.find(handle.id);
  if (it == live_.end()) {
    throw UsageError("release of allocation " + std::to_string(handle.id) +
                     " that is not live (double release?)");
  }
  const auto idx = static_cast<std::size_t>(it->second.category);
  current_[idx] -= it->second.bytes;
  total_ -= it->second.bytes;
  live_.erase(it);
}

void MemoryLedger::record_transfer(TransferDirection direction,
                                   std::uint64_t bytes, MemCategory label) {
  if (bytes == 0) throw UsageError("transfer of zero bytes");
  log_.push_back({direction, bytes, label, log_.size()});
  if (label == MemCategory::ActivationStash) {
    // Stash entries live on the host between store (d2h) and fetch (h2d).
    if (direction == TransferDirection::DeviceToHost) {
      host_bytes_ += bytes;
      host_peak_ = std::max(host_peak_, host_bytes_);
    } else {
      host_bytes_ -= std::min(host_bytes_, bytes);
    }
  }
}

MemoryReport MemoryLedger::report() const {
  std::string leaks;
  for (std::size_t i = 0; i < kMemCategoryCount; ++i) {
    if (current_[i] != 0) {
      if (!leaks.empty()) leaks += ", ";
      leaks += std::string(to_string(static_cast<MemCategory>(i))) + "=" +
               std::to_string(current_[i]);
    }
  }
  if (!leaks.empty()) throw LeakError("device bytes still allocated: " + leaks);

  MemoryReport r;
  r.device_peak = peak_;
  r.category_peak = category_peak_;
  r.host_peak = host_peak_;
  r.transfer_count = log_.size();
  for (const auto& ev : log_) {
    const auto idx = static_cast<std::size_t>(ev.label);
    if (ev.direction == TransferDirection::HostToDevice) {
      r.h2d_bytes += ev.bytes;
      r.h2d_by_label[idx] += ev.bytes;
    } else {
      r.d2h_bytes += ev.bytes;
      r.d2h_by_label[idx] += ev.bytes;
    }
  }
  return r;
}

MemoryReport merge_reports(const std::vector<MemoryReport>& reports) {
  MemoryReport out;
  for (const auto& r : reports) {
    out.device_peak = std::max(out.device_peak, r.device_peak);
    out.host_peak = std::max(out.host_peak, r.host_peak);
    for (std::size_t i = 0; i < kMemCategoryCount; ++i) {
      out.category_peak[i] = std::max(out.category_peak[i], r.category_peak[i]);
      out.h2d_by_label[i] += r.h2d_by_label[i];
      out.d2h_by_label[i] += r.d2h_by_label[i];
    }
    out.h2d_bytes += r.h2d_bytes;
    out.d2h_bytes += r.d2h_bytes;
    out.transfer_count += r.transfer_count;
  }
  return out;
}

}  // namespace l2l
