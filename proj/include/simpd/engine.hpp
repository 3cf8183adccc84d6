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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpd/controller.hpp"
#include "simpd/record.hpp"
#include "simpd/resource_model.hpp"
#include "simpd/workload.hpp"

namespace simpd {

enum class EngineKind {
  kUnifiedPrefillFirst,
  kUnifiedDecodeFirst,
  kUnifiedChunked,
  kDisaggregated,
  kSemiPd,
};

const char* to_string(EngineKind k);  // "unified-pf", ..., "semi-pd"
std::optional<EngineKind> parse_engine_kind(const std::string& s);

struct TransferMode {
  enum class Kind { kOneDecodeIteration, kBandwidth };
  Kind kind = Kind::kOneDecodeIteration;
  double bytes_per_second = 50e9;
};

struct ScheduledSwitch {
  double time = 0.0;
  PartitionConfig partition;
};

struct EngineConfig {
  EngineKind kind = EngineKind::kSemiPd;
  std::int64_t max_batch_size = 512;
  std::int64_t chunk_size = 1024;
  TransferMode transfer;
  double switch_prep_delay = 0.5;
  bool naive_switch = false;  // stall both workers for the preparation window
  PartitionConfig initial_partition{100.0, 100.0};
  bool dynamic = false;  // semi-PD: run the SLO-aware controller
  bool preemption = true;
  std::int64_t instances = 1;  // replicas behind the queue-depth router
  std::vector<ScheduledSwitch> switch_schedule;  // semi-PD: externally timed switches
};

void validate(const EngineConfig& e);

struct KvConfig {
  std::int64_t block_size = 16;
  // Explicit per-instance capacity; otherwise derived from memory sizes.
  std::optional<std::int64_t> capacity_blocks;
  // Disaggregated overrides for the two instances.
  std::optional<std::int64_t> prefill_capacity_blocks;
  std::optional<std::int64_t> decode_capacity_blocks;
  double gpu_mem_bytes = 40e9;
  double weight_bytes = 16e9;
};

void validate(const KvConfig& k);

// Blocks left for KV after charging one weight replica to `gpus` GPUs.
std::int64_t derived_capacity_blocks(const KvConfig& k, const CostParams& c, std::int64_t gpus);

struct SimulationSetup {
  EngineConfig engine;
  CostParams cost;
  ParallelismConfig parallelism;
  KvConfig kv;
  SloConfig slo;
  ControllerConfig controller;
};

void validate(const SimulationSetup& s);

struct PoolReport {
  std::string name;  // "i0", or "i0.prefill" / "i0.decode"
  std::int64_t capacity = 0;
  double high_water = 0.0;
  // First failed allocation (NaN if the pool never ran short).
  double first_exhaustion = std::numeric_limits<double>::quiet_NaN();
};

// Adoption of a partition by one worker.
struct SwitchRecord {
  double requested = 0.0;
  double adopted = 0.0;
  std::uint32_t instance = 0;
  std::string worker;  // "prefill" or "decode"
  PartitionConfig partition;
};

struct SimulationResult {
  std::vector<RequestRecord> records;
  std::vector<PoolReport> pools;
  std::vector<ControllerLogRow> controller_log;  // semi-PD dynamic, instance 0
  std::vector<SwitchRecord> switches;
  std::vector<std::uint64_t> completion_order;   // request ids as they completed
  std::uint64_t event_digest = 0;
  std::uint64_t events = 0;
  double makespan = 0.0;
  double max_mixed_partition_overlap = 0.0;  // seconds one worker ran a newer partition alone
};

// Runs one simulation to completion. Throws SimulationError if requests remain
// incomplete when the event queue drains.
SimulationResult simulate(const SimulationSetup& setup, const Trace& trace);

struct InstanceLoad {
  std::size_t waiting = 0;
  double kv_utilization = 0.0;
};

// Minimizes (waiting depth, KV utilization) lexicographically; ties go to the
// lowest index. Throws ContractViolation on an empty span.
std::size_t route_request(std::span<const InstanceLoad> loads);

}  // namespace simpd
