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

#include "simpd/sim_core.hpp"

#include <bit>
#include <string>

#include "simpd/error.hpp"

namespace simpd {

namespace {

constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
}

}  // namespace

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kRequestArrival:
      return "request-arrival";
    case EventKind::kIterationComplete:
      return "iteration-complete";
    case EventKind::kSwitchPrepared:
      return "switch-prepared";
    case EventKind::kTransferComplete:
      return "transfer-complete";
    case EventKind::kControllerTick:
      return "controller-tick";
  }
  return "unknown";
}

std::uint64_t EventQueue::push(SimEvent e) {
  if (!(e.time >= now_)) {
    throw ContractViolation("event scheduled into the past: t=" +
                            std::to_string(e.time) +
                            " now=" + std::to_string(now_));
  }
  e.seq = next_seq_++;
  heap_.push(e);
  return e.seq;
}

std::optional<SimEvent> EventQueue::advance() {
  if (heap_.empty()) return std::nullopt;
  SimEvent e = heap_.top();
  heap_.pop();
  now_ = e.time;
  mix(digest_, std::bit_cast<std::uint64_t>(e.time));
  mix(digest_, static_cast<std::uint64_t>(e.kind));
  mix(digest_, e.instance);
  mix(digest_, e.payload);
  mix(digest_, e.seq);
  ++dispatched_;
  return e;
}

}  // namespace simpd
