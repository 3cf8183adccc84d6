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
#include <span>
#include <utility>

namespace simpd {

// SM percentages granted to the prefill (x) and decode (y) workers.
struct PartitionConfig {
  double x = 100.0;
  double y = 100.0;

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

void validate(const PartitionConfig& p);

// Iteration cost coefficients, all in seconds at 100% of one instance's SMs.
struct CostParams {
  double l100_prefill_base = 0.005;
  double prefill_per_token = 1.4e-4;
  double prefill_attn_quad = 0.0;
  double decode_base = 0.006;
  double decode_per_seq = 1.5e-4;
  double decode_per_kv_token = 6.4e-7;
  double kv_bytes_per_token = 131072.0;
  std::int64_t gpu_count = 1;
};

void validate(const CostParams& c);

struct ParallelismConfig {
  std::int64_t tp_prefill = 1;
  std::int64_t tp_decode = 1;
  std::int64_t pp_prefill = 1;
  std::int64_t pp_decode = 1;
  double tp_efficiency = 0.9;
};

void validate(const ParallelismConfig& p);

// l_x = (100 / x) * l_100.
double scaled_latency(double l100, double share);

// Shares actually obtained when both workers compete. Oversubscription
// (x + y > 100) is resolved by proportional scaling.
std::pair<double, double> effective_shares(const PartitionConfig& p);

// tp * efficiency^log2(tp).
double tp_speedup(std::int64_t tp, double efficiency);

// Prefill work for one request chunk: `tokens` new tokens on top of `context`
// already-cached tokens of the same request.
struct PrefillChunk {
  std::int64_t tokens = 0;
  std::int64_t context = 0;
};

// Work at 100% share, before TP scaling.
double prefill_work(std::span<const PrefillChunk> batch, const CostParams& c);
double decode_work(std::span<const std::int64_t> kv_lens, const CostParams& c);
// Fused batch of prefill chunks and decode sequences; one base overhead.
double mixed_work(std::span<const PrefillChunk> chunks, std::span<const std::int64_t> kv_lens,
                  const CostParams& c);

double prefill_iter_latency(std::span<const std::int64_t> batch_tokens, const CostParams& c,
                            std::int64_t tp, double tp_efficiency, double share);
double prefill_iter_latency(std::span<const std::int64_t> batch_tokens, const CostParams& c,
                            const ParallelismConfig& par, double share);
double decode_iter_latency(std::span<const std::int64_t> kv_lens, const CostParams& c,
                           std::int64_t tp, double tp_efficiency, double share);
double decode_iter_latency(std::span<const std::int64_t> kv_lens, const CostParams& c,
                           const ParallelismConfig& par, double share);

}  // namespace simpd
