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

#include "l2l/error.hpp"

namespace l2l {

OutOfMemoryError::OutOfMemoryError(std::string category,
                                   std::uint64_t requested,
                                   std::uint64_t in_use, std::uint64_t budget)
    : Error("simulated out-of-memory: " + category + " needs " +
            std::to_string(requested) + " bytes with " +
            std::to_string(in_use) + " of " + std::to_string(budget) +
            " bytes in use (shortfall " +
            std::to_string(in_use + requested - budget) + " bytes)"),
      category_(std::move(category)),
      requested_(requested),
      in_use_(in_use),
      budget_(budget) {}

}  // namespace l2l
