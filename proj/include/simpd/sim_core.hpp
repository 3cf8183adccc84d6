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
#include <optional>
#include <queue>
#include <vector>

namespace simpd {

enum class EventKind : std::uint8_t {
  kRequestArrival = 0,
  kIterationComplete = 1,
  kSwitchPrepared = 2,
  kTransferComplete = 3,
  kControllerTick = 4,
};

const char* to_string(EventKind kind);

// One scheduled occurrence on the virtual timeline. `instance`, `payload` and
// `token` are interpreted by the engine that scheduled the event: typically
// instance index, worker or request index, and a staleness token.
struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::kRequestArrival;
  std::uint32_t instance = 0;
  std::uint64_t payload = 0;
  std::uint64_t token = 0;
  std::uint64_t seq = 0;
};

// Time-ordered event queue with a monotone virtual clock (seconds).
// Dispatch order is a stable sort by (time, seq); seq is assigned on push.
class EventQueue {
 public:
  double now() const noexcept { return now_; }
  bool empty() const noexcept { return heap_.empty(); }
  std::size_t size() const noexcept { return heap_.size(); }

  // Throws ContractViolation when `e.time` lies before now(). The seq field of
  // `e` is overwritten. Returns the assigned seq.
  std::uint64_t push(SimEvent e);

  std::uint64_t push(double time, EventKind kind, std::uint32_t instance = 0,
                     std::uint64_t payload = 0, std::uint64_t token = 0) {
    return push(SimEvent{time, kind, instance, payload, token, 0});
  }

  // Pops the earliest event and moves the clock to its time. std::nullopt marks
  // the end of the simulation.
  std::optional<SimEvent> advance();

  // FNV-1a digest over every dispatched event (time bits, kind, instance,
  // payload, seq). Two runs with identical inputs produce identical digests.
  std::uint64_t digest() const noexcept { return digest_; }
  std::uint64_t dispatched() const noexcept { return dispatched_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const noexcept {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t digest_ = 14695981039346656037ULL;
  std::uint64_t dispatched_ = 0;
};

}  // namespace simpd
