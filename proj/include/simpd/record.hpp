/* Copyright 2026 The simpd Authors. All Rights Reserved.

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
#include <limits>

#include "simpd/workload.hpp"

namespace simpd {

// Lifecycle timestamps of one request. Unset times are NaN.
// Invariant once complete: arrival <= first_scheduled <= prefill_done <= completed.
struct RequestRecord {
  Request request;
  double first_scheduled = std::numeric_limits<double>::quiet_NaN();
  double prefill_done = std::numeric_limits<double>::quiet_NaN();  // first token
  double completed = std::numeric_limits<double>::quiet_NaN();
  std::int64_t preemptions = 0;
  double transfer_delay = 0.0;  // accumulated KV transfer time (disaggregated)
};

}  // namespace simpd
