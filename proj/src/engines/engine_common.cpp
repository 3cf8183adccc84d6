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

#include <fmt/format.h>

#include <algorithm>

#include "engine_impl.hpp"
#include "simpd/error.hpp"

namespace simpd {

const char* to_string(EngineKind k) {
  switch (k) {
    case EngineKind::kUnifiedPrefillFirst:
      return "unified-pf";
    case EngineKind::kUnifiedDecodeFirst:
      return "unified-df";
    case EngineKind::kUnifiedChunked:
      return "unified-chunked";
    case EngineKind::kDisaggregated:
      return "disaggregated";
    case EngineKind::kSemiPd:
      return "semi-pd";
  }
  return "unknown";
}

std::optional<EngineKind> parse_engine_kind(const std::string& s) {
  for (auto k : {EngineKind::kUnifiedPrefillFirst, EngineKind::kUnifiedDecodeFirst,
                 EngineKind::kUnifiedChunked, EngineKind::kDisaggregated, EngineKind::kSemiPd}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

void validate(const EngineConfig& e) {
  if (e.max_batch_size < 1) throw ConfigError("engine.max_batch_size", "must be >= 1");
  if (e.chunk_size < 1) throw ConfigError("engine.chunk_size", "must be >= 1");
  if (e.instances < 1) throw ConfigError("engine.instances", "must be >= 1");
  if (!(e.switch_prep_delay >= 0.0)) throw ConfigError("engine.switch_prep_delay", "must be >= 0");
  if (e.transfer.kind == TransferMode::Kind::kBandwidth && !(e.transfer.bytes_per_second > 0.0)) {
    throw ConfigError("engine.transfer_bandwidth", "must be > 0");
  }
  try {
    validate(e.initial_partition);
  } catch (const ConfigError& err) {
    throw ConfigError("engine.initial_partition", err.what());
  }
  for (std::size_t i = 0; i < e.switch_schedule.size(); ++i) {
    const auto field = fmt::format("engine.switch_schedule[{}]", i);
    if (!(e.switch_schedule[i].time >= 0.0)) throw ConfigError(field, "time must be >= 0");
    try {
      validate(e.switch_schedule[i].partition);
    } catch (const ConfigError& err) {
      throw ConfigError(field, err.what());
    }
  }
  if (e.kind != EngineKind::kSemiPd && (e.dynamic || !e.switch_schedule.empty())) {
    throw ConfigError("engine.dynamic", "partition switching needs engine kind semi-pd");
  }
}

void validate(const KvConfig& k) {
  if (k.block_size < 1) throw ConfigError("kv.block_size", "must be >= 1");
  if (k.capacity_blocks && *k.capacity_blocks < 1) throw ConfigError("kv.capacity_blocks", "must be >= 1");
  if (k.prefill_capacity_blocks && *k.prefill_capacity_blocks < 1) {
    throw ConfigError("kv.prefill_capacity_blocks", "must be >= 1");
  }
  if (k.decode_capacity_blocks && *k.decode_capacity_blocks < 1) {
    throw ConfigError("kv.decode_capacity_blocks", "must be >= 1");
  }
  if (!(k.gpu_mem_bytes > 0.0)) throw ConfigError("kv.gpu_mem_gb", "must be > 0");
  if (!(k.weight_bytes >= 0.0)) throw ConfigError("kv.weight_gb", "must be >= 0");
}

std::int64_t derived_capacity_blocks(const KvConfig& k, const CostParams& c, std::int64_t gpus) {
  const double free_bytes = k.gpu_mem_bytes * static_cast<double>(gpus) - k.weight_bytes;
  const double per_block = c.kv_bytes_per_token * static_cast<double>(k.block_size);
  const auto n = per_block > 0.0 ? static_cast<std::int64_t>(std::floor(free_bytes / per_block)) : 0;
  if (n < 1) throw ConfigError("kv.gpu_mem_gb", "no memory left for KV after weights");
  return n;
}

void validate(const SimulationSetup& s) {
  validate(s.engine);
  validate(s.cost);
  validate(s.parallelism);
  validate(s.kv);
  validate(s.slo);
  validate(s.controller);
  if (s.engine.kind != EngineKind::kDisaggregated) {
    if (s.parallelism.tp_prefill != s.parallelism.tp_decode ||
        s.parallelism.pp_prefill != s.parallelism.pp_decode) {
      throw ConfigError("parallelism",
                        "co-located engines need identical prefill/decode TP and PP degrees");
    }
  }
}

std::size_t route_request(std::span<const InstanceLoad> loads) {
  if (loads.empty()) throw ContractViolation("route_request over zero instances");
  std::size_t best = 0;
  for (std::size_t i = 1; i < loads.size(); ++i) {
    const auto& a = loads[i];
    const auto& b = loads[best];
    if (a.waiting < b.waiting || (a.waiting == b.waiting && a.kv_utilization < b.kv_utilization)) {
      best = i;
    }
  }
  return best;
}

namespace detail {

void Worker::progress(double now) {
  const double dt = now - last_;
  if (dt > 0.0) {
    for (auto& it : in_flight_) it.remaining = std::max(0.0, it.remaining - dt * rate_);
  }
  last_ = now;
}

void Worker::schedule(EventQueue& q, Iteration& it) {
  it.token = next_token_++;
  q.push(q.now() + it.remaining / rate_, EventKind::kIterationComplete, instance_, id_, it.token);
}

void Worker::launch(EventQueue& q, Iteration it) {
  if (!has_free_slot()) throw ContractViolation("launch on a worker with no free slot");
  if (it.empty()) throw ContractViolation("launch of an empty iteration");
  progress(q.now());
  it.remaining = it.work;
  it.started = q.now();
  schedule(q, it);
  in_flight_.push_back(std::move(it));
}

std::optional<Iteration> Worker::finish(EventQueue& q, const SimEvent& e) {
  auto pos = std::find_if(in_flight_.begin(), in_flight_.end(),
                          [&](const Iteration& it) { return it.token == e.token; });
  if (pos == in_flight_.end()) return std::nullopt;
  progress(q.now());
  Iteration done = std::move(*pos);
  in_flight_.erase(pos);
  return done;
}

void Worker::set_rate(EventQueue& q, double rate) {
  if (rate == rate_) return;
  if (!(rate > 0.0)) throw ContractViolation("worker rate must be > 0");
  progress(q.now());
  rate_ = rate;
  for (auto& it : in_flight_) schedule(q, it);
}

void InstanceEngine::enqueue_arrival(std::size_t r) {
  if (rec(r).request.arrival != now()) {
    throw ContractViolation("request admitted at a time other than its arrival");
  }
  auto& s = st(r);
  s.prefill_target = rec(r).request.input_len;
  s.prefilled = 0;
  s.pass_allocated = false;
  s.where = Where::kPrefillWaiting;
  prefill_waiting_.push_back(r);
}

void InstanceEngine::mark_scheduled(std::size_t r) {
  if (std::isnan(rec(r).first_scheduled)) rec(r).first_scheduled = now();
}

std::vector<std::size_t> InstanceEngine::take_prefill_batch(KvPool& pool, PoolStats& stats) {
  std::vector<std::size_t> batch;
  const auto cap = static_cast<std::size_t>(ecfg().max_batch_size);
  while (!prefill_waiting_.empty() && batch.size() < cap) {
    const std::size_t r = prefill_waiting_.front();
    auto& s = st(r);
    if (!s.pass_allocated) {
      const std::int64_t need = blocks(s.prefill_target) - pool.allocated(r);
      if (need > 0 && !pool.try_allocate(r, need)) {
        stats.exhausted(now());
        break;
      }
      s.pass_allocated = true;
    }
    prefill_waiting_.pop_front();
    s.where = Where::kPrefilling;
    s.in_flight = true;
    mark_scheduled(r);
    batch.push_back(r);
  }
  return batch;
}

void InstanceEngine::evict(std::size_t victim, KvPool& pool, std::vector<std::size_t>& batch) {
  pool.release(victim);
  running_.erase(std::find(running_.begin(), running_.end(), victim));
  batch.erase(std::remove(batch.begin(), batch.end(), victim), batch.end());
  auto& s = st(victim);
  s.prefill_target = kv_len(victim);
  s.prefilled = 0;
  s.pass_allocated = false;
  s.where = Where::kPrefillWaiting;
  ++rec(victim).preemptions;
  requeue_preempted(victim);
}

std::vector<std::size_t> InstanceEngine::take_decode_batch(KvPool& pool, PoolStats& stats,
                                                           std::size_t limit) {
  const auto cap = static_cast<std::size_t>(ecfg().max_batch_size);
  while (!decode_waiting_.empty() && running_.size() < cap) {
    const std::size_t r = decode_waiting_.front();
    decode_waiting_.pop_front();
    st(r).where = Where::kRunning;
    running_.push_back(r);
  }

  std::vector<std::size_t> batch;
  const std::vector<std::size_t> candidates = running_;
  for (const std::size_t r : candidates) {
    if (batch.size() >= limit) break;
    if (st(r).where != Where::kRunning || st(r).in_flight) continue;
    bool ok = true;
    const std::int64_t need = blocks(kv_len(r)) - pool.allocated(r);
    if (need > 0) ok = pool.try_allocate(r, need);
    while (!ok) {
      stats.exhausted(now());
      if (!ecfg().preemption) break;
      std::optional<std::size_t> victim;
      for (const std::size_t v : running_) {
        if (st(v).in_flight) continue;
        if (!victim) {
          victim = v;
          continue;
        }
        const auto& a = rec(v).request;
        const auto& b = rec(*victim).request;
        if (a.arrival > b.arrival || (a.arrival == b.arrival && a.id > b.id)) victim = v;
      }
      if (!victim) break;
      if (*victim == r && pool.allocations().size() == 1) {
        throw SimulationError(fmt::format(
            "request {} needs more KV blocks than the pool capacity ({})", rec(r).request.id,
            pool.capacity()));
      }
      evict(*victim, pool, batch);
      if (*victim == r) break;
      ok = pool.try_allocate(r, blocks(kv_len(r)) - pool.allocated(r));
    }
    if (ok && st(r).where == Where::kRunning) batch.push_back(r);
  }
  for (const std::size_t r : batch) st(r).in_flight = true;
  return batch;
}

bool InstanceEngine::finish_prefill_pass(std::size_t r, KvPool& pool) {
  auto& s = st(r);
  auto& rc = rec(r);
  s.in_flight = false;
  s.pass_allocated = false;
  s.prefilled = 0;
  if (std::isnan(rc.prefill_done)) {
    rc.prefill_done = now();
    s.generated = 1;
  }
  if (s.generated >= rc.request.output_len) {
    complete(r, pool);
    return false;
  }
  return true;
}

std::size_t InstanceEngine::finish_decode(const std::vector<std::size_t>& batch, KvPool& pool) {
  std::size_t done = 0;
  for (const std::size_t r : batch) {
    auto& s = st(r);
    s.in_flight = false;
    ++s.generated;
    if (s.generated >= rec(r).request.output_len) {
      running_.erase(std::find(running_.begin(), running_.end(), r));
      complete(r, pool);
      ++done;
    }
  }
  return done;
}

void InstanceEngine::complete(std::size_t r, KvPool& pool) {
  if (pool.holds(r)) pool.release(r);
  st(r).where = Where::kDone;
  st(r).in_flight = false;
  rec(r).completed = now();
  s_.completion_order.push_back(rec(r).request.id);
  ++s_.completed;
}

double InstanceEngine::decode_work_for(const std::vector<std::size_t>& batch, std::int64_t tp) const {
  std::vector<std::int64_t> kv;
  kv.reserve(batch.size());
  for (const std::size_t r : batch) kv.push_back(kv_len(r));
  const auto& c = setup().cost;
  return (c.decode_base + decode_work(kv, c)) / tp_speedup(tp, setup().parallelism.tp_efficiency);
}

double InstanceEngine::prefill_work_for(const std::vector<std::size_t>& reqs,
                                        const std::vector<std::int64_t>& chunk_tokens,
                                        std::int64_t tp) const {
  std::vector<PrefillChunk> chunks;
  chunks.reserve(reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const std::int64_t t = chunk_tokens.empty() ? s_.state[reqs[i]].prefill_target : chunk_tokens[i];
    chunks.push_back({t, s_.state[reqs[i]].prefilled});
  }
  const auto& c = setup().cost;
  return (c.l100_prefill_base + prefill_work(chunks, c)) /
         tp_speedup(tp, setup().parallelism.tp_efficiency);
}

}  // namespace detail

SimulationResult simulate(const SimulationSetup& setup, const Trace& trace) {
  validate(setup);
  detail::Shared s(setup);
  s.records.reserve(trace.size());
  for (const auto& r : trace) {
    RequestRecord rec;
    rec.request = r;
    s.records.push_back(rec);
  }
  s.state.resize(trace.size());

  std::vector<std::unique_ptr<detail::InstanceEngine>> engines;
  for (std::int64_t i = 0; i < setup.engine.instances; ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    switch (setup.engine.kind) {
      case EngineKind::kUnifiedPrefillFirst:
      case EngineKind::kUnifiedDecodeFirst:
      case EngineKind::kUnifiedChunked:
        engines.push_back(detail::make_unified(s, id));
        break;
      case EngineKind::kDisaggregated:
        engines.push_back(detail::make_disaggregated(s, id));
        break;
      case EngineKind::kSemiPd:
        engines.push_back(detail::make_semi_pd(s, id));
        break;
    }
  }

  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (i > 0 && trace[i].arrival < trace[i - 1].arrival) {
      throw ConfigError("trace", "arrivals must be nondecreasing");
    }
    s.queue.push(trace[i].arrival, EventKind::kRequestArrival, 0, i);
  }
  for (std::size_t k = 0; k < setup.engine.switch_schedule.size(); ++k) {
    for (std::size_t i = 0; i < engines.size(); ++i) {
      s.queue.push(setup.engine.switch_schedule[k].time, EventKind::kControllerTick,
                   static_cast<std::uint32_t>(i), k, detail::kScheduledSwitchToken);
    }
  }

  std::vector<InstanceLoad> loads(engines.size());
  while (auto e = s.queue.advance()) {
    if (e->kind == EventKind::kRequestArrival) {
      std::size_t target = 0;
      if (engines.size() > 1) {
        for (std::size_t i = 0; i < engines.size(); ++i) {
          loads[i] = {engines[i]->waiting_depth(), engines[i]->kv_utilization()};
        }
        target = route_request(loads);
      }
      engines[target]->admit(static_cast<std::size_t>(e->payload));
    } else {
      engines.at(e->instance)->on_event(*e);
    }
  }

  if (s.completed != trace.size()) {
    throw SimulationError(fmt::format("simulation stalled: {} of {} requests incomplete",
                                      trace.size() - s.completed, trace.size()));
  }

  SimulationResult out;
  out.records = std::move(s.records);
  for (const auto& e : engines) e->report(out.pools);
  if (!engines.empty()) {
    if (const auto* log = engines.front()->controller_log()) out.controller_log = *log;
  }
  out.switches = std::move(s.switches);
  out.completion_order = std::move(s.completion_order);
  out.event_digest = s.queue.digest();
  out.events = s.queue.dispatched();
  out.makespan = s.queue.now();
  out.max_mixed_partition_overlap = s.max_mixed_overlap;
  return out;
}

}  // namespace simpd
