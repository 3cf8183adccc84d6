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

#include "simpd/resource_model.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "simpd/error.hpp"

namespace simpd {

void validate(const PartitionConfig& p) {
  if (!(p.x > 0.0 && p.x <= 100.0)) throw ConfigError("partition.x", "must satisfy 0 < x <= 100");
  if (!(p.y > 0.0 && p.y <= 100.0)) throw ConfigError("partition.y", "must satisfy 0 < y <= 100");
}

void validate(const CostParams& c) {
  const std::pair<const char*, double> coeffs[] = {
      {"cost.l100_prefill_base", c.l100_prefill_base},
      {"cost.prefill_per_token", c.prefill_per_token},
      {"cost.prefill_attn_quad", c.prefill_attn_quad},
      {"cost.decode_base", c.decode_base},
      {"cost.decode_per_seq", c.decode_per_seq},
      {"cost.decode_per_kv_token", c.decode_per_kv_token},
      {"cost.kv_bytes_per_token", c.kv_bytes_per_token},
  };
  for (const auto& [name, v] : coeffs) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(name, "must be finite and >= 0");
  }
  if (!(c.prefill_per_token > 0.0 || c.prefill_attn_quad > 0.0)) {
    throw ConfigError("cost.prefill_per_token", "prefill needs a positive per-work coefficient");
  }
  if (!(c.decode_per_seq > 0.0 || c.decode_per_kv_token > 0.0)) {
    throw ConfigError("cost.decode_per_seq", "decode needs a positive per-work coefficient");
  }
  if (c.gpu_count < 1) throw ConfigError("cost.gpu_count", "must be >= 1");
}

void validate(const ParallelismConfig& p) {
  if (p.tp_prefill < 1) throw ConfigError("parallelism.tp_prefill", "must be >= 1");
  if (p.tp_decode < 1) throw ConfigError("parallelism.tp_decode", "must be >= 1");
  if (p.pp_prefill < 1) throw ConfigError("parallelism.pp_prefill", "must be >= 1");
  if (p.pp_decode < 1) throw ConfigError("parallelism.pp_decode", "must be >= 1");
  if (!(p.tp_efficiency > 0.0 && p.tp_efficiency <= 1.0)) {
    throw ConfigError("parallelism.tp_efficiency", "must lie in (0, 1]");
  }
}

double scaled_latency(double l100, double share) {
  if (!(share > 0.0)) throw ContractViolation("share must be > 0, got " + std::to_string(share));
  if (!(l100 >= 0.0)) throw ContractViolation("l100 must be >= 0");
  return (100.0 / share) * l100;
}

std::pair<double, double> effective_shares(const PartitionConfig& p) {
  const double sum = p.x + p.y;
  if (sum <= 100.0) return {p.x, p.y};
  return {100.0 * p.x / sum, 100.0 * p.y / sum};
}

double tp_speedup(std::int64_t tp, double efficiency) {
  if (tp < 1) throw ContractViolation("tp must be >= 1");
  const double t = static_cast<double>(tp);
  return t * std::pow(efficiency, std::log2(t));
}

double prefill_work(std::span<const PrefillChunk> batch, const CostParams& c) {
  double tokens = 0.0;
  double quad = 0.0;
  for (const auto& ch : batch) {
    const double n = static_cast<double>(ch.tokens);
    tokens += n;
    quad += n * static_cast<double>(ch.context + ch.tokens);
  }
  return c.prefill_per_token * tokens + c.prefill_attn_quad * quad;
}

double decode_work(std::span<const std::int64_t> kv_lens, const CostParams& c) {
  double kv = 0.0;
  for (auto k : kv_lens) kv += static_cast<double>(k);
  return c.decode_per_seq * static_cast<double>(kv_lens.size()) + c.decode_per_kv_token * kv;
}

double mixed_work(std::span<const PrefillChunk> chunks, std::span<const std::int64_t> kv_lens,
                  const CostParams& c) {
  if (chunks.empty() && kv_lens.empty()) throw ContractViolation("empty mixed batch");
  double base = 0.0;
  if (!chunks.empty()) base = c.l100_prefill_base;
  if (!kv_lens.empty()) base = std::max(base, c.decode_base);
  return base + prefill_work(chunks, c) + decode_work(kv_lens, c);
}

double prefill_iter_latency(std::span<const std::int64_t> batch_tokens, const CostParams& c,
                            std::int64_t tp, double tp_efficiency, double share) {
  if (batch_tokens.empty()) throw ContractViolation("empty prefill batch");
  std::vector<PrefillChunk> chunks;
  chunks.reserve(batch_tokens.size());
  for (auto t : batch_tokens) chunks.push_back({t, 0});
  const double l100 = (c.l100_prefill_base + prefill_work(chunks, c)) / tp_speedup(tp, tp_efficiency);
  return scaled_latency(l100, share);
}

double prefill_iter_latency(std::span<const std::int64_t> batch_tokens, const CostParams& c,
                            const ParallelismConfig& par, double share) {
  return prefill_iter_latency(batch_tokens, c, par.tp_prefill, par.tp_efficiency, share);
}

double decode_iter_latency(std::span<const std::int64_t> kv_lens, const CostParams& c,
                           std::int64_t tp, double tp_efficiency, double share) {
  if (kv_lens.empty()) throw ContractViolation("empty decode batch");
  const double l100 = (c.decode_base + decode_work(kv_lens, c)) / tp_speedup(tp, tp_efficiency);
  return scaled_latency(l100, share);
}

double decode_iter_latency(std::span<const std::int64_t> kv_lens, const CostParams& c,
                           const ParallelismConfig& par, double share) {
  return decode_iter_latency(kv_lens, c, par.tp_decode, par.tp_efficiency, share);
}

}  // namespace simpd
