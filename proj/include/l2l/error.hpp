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
#include <stdexcept>
#include <string>

namespace l2l {

// Root of every error raised by the engine. Callers that only care about
// "something in l2l failed" catch this; the subclasses carry the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Internal state does not match what an operation expects (stale residuals,
// stash consumed twice, ...).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. releasing an allocation twice.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Parameter-server protocol violation (duplicate contribution, bad worker id).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Reduction requested before every worker contributed.
class NotReadyError : public Error {
 public:
  using Error::Error;
};

// Batch plan cannot be executed (ragged shards, u != 1 for conventional, ...).
class PlanError : public Error {
 public:
  using Error::Error;
};

// Cost-model argument outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Configuration text rejected.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Allocations still live when the ledger is summarized.
class LeakError : public Error {
 public:
  using Error::Error;
};

// Simulated device out-of-memory: an allocation would push the device total
// past the configured budget.
class OutOfMemoryError : public Error {
 public:
  OutOfMemoryError(std::string category, std::uint64_t requested,
                   std::uint64_t in_use, std::uint64_t budget);

  const std::string& category() const { return category_; }
  std::uint64_t requested() const { return requested_; }
  std::uint64_t in_use() const { return in_use_; }
  std::uint64_t budget() const { return budget_; }
  std::uint64_t shortfall() const { return in_use_ + requested_ - budget_; }

 private:
  std::string category_;
  std::uint64_t requested_;
  std::uint64_t in_use_;
  std::uint64_t budget_;
};

}  // namespace l2l
