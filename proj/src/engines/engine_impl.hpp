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

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "simpd/engine.hpp"
#include "simpd/kv_pool.hpp"
#include "simpd/sim_core.hpp"

namespace simpd::detail {

enum class Where : std::uint8_t {
  kNone,
  kPrefillWaiting,
  kPrefilling,
  kTransfer,
  kTransferWaiting,
  kDecodeWaiting,
  kRunning,
  kDone,
};

struct ReqState {
  std::int64_t generated = 0;       // output tokens produced so far
  std::int64_t prefill_target = 0;  // tokens the current prefill pass covers
  std::int64_t prefilled = 0;       // tokens of the current pass already processed
  bool pass_allocated = false;
  bool in_flight = false;
  Where where = Where::kNone;
};

// Simulation-wide state shared by every instance.
struct Shared {
  explicit Shared(const SimulationSetup& s) : setup(s) {}

  const SimulationSetup& setup;
  EventQueue queue;
  std::vector<RequestRecord> records;
  std::vector<ReqState> state;
  std::vector<std::uint64_t> completion_order;
  std::vector<SwitchRecord> switches;
  double max_mixed_overlap = 0.0;
  std::size_t completed = 0;
};

struct Iteration {
  std::uint64_t token = 0;
  std::vector<std::size_t> prefill;        // request indices
  std::vector<std::int64_t> chunk_tokens;  // parallel to `prefill`
  std::vector<std::size_t> decode;
  double work = 0.0;       // seconds at 100% share, TP scaling applied
  double remaining = 0.0;  // work left
  double started = 0.0;

  bool empty() const { return prefill.empty() && decode.empty(); }
};

// A worker runs up to `slots` iterations at once (pipeline stages). Each
// in-flight iteration progresses at `rate` = share / 100; changing the rate
// reschedules completions, and superseded completion events go stale.
class Worker {
 public:
  Worker(std::uint32_t instance, std::uint64_t id, std::int64_t slots, double rate)
      : instance_(instance), id_(id), slots_(slots), rate_(rate) {}

  bool has_free_slot() const { return static_cast<std::int64_t>(in_flight_.size()) < slots_; }
  bool active() const { return !in_flight_.empty(); }
  double rate() const { return rate_; }
  std::uint64_t id() const { return id_; }

  void launch(EventQueue& q, Iteration it);
  // nullopt for a stale event.
  std::optional<Iteration> finish(EventQueue& q, const SimEvent& e);
  void set_rate(EventQueue& q, double rate);

 private:
  void progress(double now);
  void schedule(EventQueue& q, Iteration& it);

  std::uint32_t instance_;
  std::uint64_t id_;
  std::int64_t slots_;
  double rate_;
  double last_ = 0.0;
  std::vector<Iteration> in_flight_;
  std::uint64_t next_token_ = 1;
};

struct PoolStats {
  double first_exhaustion = std::numeric_limits<double>::quiet_NaN();
  void exhausted(double now) {
    if (std::isnan(first_exhaustion)) first_exhaustion = now;
  }
};

// Special token marking a controller-tick event that carries an externally
// scheduled switch (payload = index into EngineConfig::switch_schedule).
inline constexpr std::uint64_t kScheduledSwitchToken = 1;

class InstanceEngine {
 public:
  InstanceEngine(Shared& s, std::uint32_t instance) : s_(s), instance_(instance) {}
  virtual ~InstanceEngine() = default;

  virtual void admit(std::size_t req) = 0;
  virtual void on_event(const SimEvent& e) = 0;
  virtual std::size_t waiting_depth() const = 0;
  virtual double kv_utilization() = 0;
  virtual void report(std::vector<PoolReport>& out) const = 0;
  virtual const std::vector<ControllerLogRow>* controller_log() const { return nullptr; }

 protected:
  const SimulationSetup& setup() const { return s_.setup; }
  const EngineConfig& ecfg() const { return s_.setup.engine; }
  double now() const { return s_.queue.now(); }
  RequestRecord& rec(std::size_t r) { return s_.records[r]; }
  ReqState& st(std::size_t r) { return s_.state[r]; }
  std::int64_t kv_len(std::size_t r) const {
    return s_.records[r].request.input_len + s_.state[r].generated;
  }
  std::int64_t blocks(std::int64_t tokens) const {
    return blocks_for_tokens(tokens, s_.setup.kv.block_size);
  }

  void enqueue_arrival(std::size_t r);
  void mark_scheduled(std::size_t r);

  // FCFS prefill batch: pops waiting requests whose whole prefill KV allocates,
  // up to max_batch_size; stops at the first allocation failure.
  std::vector<std::size_t> take_prefill_batch(KvPool& pool, PoolStats& stats);

  // Continuous batching: admits decode-waiting requests into the running set,
  // then selects up to `limit` idle running sequences, growing their KV by a
  // block when they cross a block boundary. Allocation failure preempts the
  // most recently arrived idle running request (recompute) or stalls the
  // sequence when preemption is disabled.
  std::vector<std::size_t> take_decode_batch(KvPool& pool, PoolStats& stats,
                                             std::size_t limit = std::numeric_limits<std::size_t>::max());

  // Marks the end of a prefill pass. Returns true when the request still needs
  // decoding (false: it finished with its first token).
  bool finish_prefill_pass(std::size_t r, KvPool& pool);

  // Appends one token to every sequence of a decode batch, completing those
  // that reached output_len. Returns the number completed.
  std::size_t finish_decode(const std::vector<std::size_t>& batch, KvPool& pool);

  void complete(std::size_t r, KvPool& pool);

  // Where preempted requests go for recompute.
  virtual void requeue_preempted(std::size_t r) { prefill_waiting_.push_front(r); }

  double decode_work_for(const std::vector<std::size_t>& batch, std::int64_t tp) const;
  double prefill_work_for(const std::vector<std::size_t>& reqs,
                          const std::vector<std::int64_t>& chunk_tokens, std::int64_t tp) const;

  Shared& s_;
  std::uint32_t instance_;
  std::deque<std::size_t> prefill_waiting_;
  std::deque<std::size_t> decode_waiting_;
  std::vector<std::size_t> running_;

 private:
  void evict(std::size_t victim, KvPool& pool, std::vector<std::size_t>& batch);
};

std::unique_ptr<InstanceEngine> make_unified(Shared& s, std::uint32_t instance);
std::unique_ptr<InstanceEngine> make_disaggregated(Shared& s, std::uint32_t instance);
std::unique_ptr<InstanceEngine> make_semi_pd(Shared& s, std::uint32_t instance);

}  // namespace simpd::detail
