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

#include <algorithm>

#include "engine_impl.hpp"
#include "simpd/error.hpp"

namespace simpd::detail {

namespace {

// Separate prefill and decode instances with their own KV pools. A request's
// KV moves from P to D after its prefill, costing a transfer delay.
class DisaggregatedEngine final : public InstanceEngine {
 public:
  DisaggregatedEngine(Shared& s, std::uint32_t instance)
      : InstanceEngine(s, instance),
        p_pool_(prefill_capacity(s.setup), s.setup.kv.block_size),
        d_pool_(decode_capacity(s.setup), s.setup.kv.block_size),
        prefill_(instance, 0, s.setup.parallelism.pp_prefill, 1.0),
        decode_(instance, 1, s.setup.parallelism.pp_decode, 1.0) {}

  void admit(std::size_t r) override {
    enqueue_arrival(r);
    try_launch();
  }

  void on_event(const SimEvent& e) override {
    switch (e.kind) {
      case EventKind::kIterationComplete:
        if (e.payload == 0) {
          on_prefill_done(e);
        } else {
          on_decode_done(e);
        }
        break;
      case EventKind::kTransferComplete: {
        const auto r = static_cast<std::size_t>(e.token);
        p_pool_.release(r);
        st(r).where = Where::kTransferWaiting;
        transfer_waiting_.push_back(r);
        break;
      }
      default:
        throw ContractViolation(std::string("disaggregated engine cannot handle ") + to_string(e.kind));
    }
    try_launch();
  }

  std::size_t waiting_depth() const override { return prefill_waiting_.size(); }
  double kv_utilization() override { return p_pool_.utilization(); }

  void report(std::vector<PoolReport>& out) const override {
    const std::string base = "i" + std::to_string(instance_);
    out.push_back({base + ".prefill", p_pool_.capacity(), p_pool_.high_water(), p_stats_.first_exhaustion});
    out.push_back({base + ".decode", d_pool_.capacity(), d_pool_.high_water(), d_stats_.first_exhaustion});
  }

 private:
  static std::int64_t prefill_capacity(const SimulationSetup& s) {
    if (s.kv.prefill_capacity_blocks) return *s.kv.prefill_capacity_blocks;
    if (s.kv.capacity_blocks) return *s.kv.capacity_blocks;
    return derived_capacity_blocks(s.kv, s.cost, s.parallelism.tp_prefill * s.parallelism.pp_prefill);
  }
  static std::int64_t decode_capacity(const SimulationSetup& s) {
    if (s.kv.decode_capacity_blocks) return *s.kv.decode_capacity_blocks;
    if (s.kv.capacity_blocks) return *s.kv.capacity_blocks;
    return derived_capacity_blocks(s.kv, s.cost, s.parallelism.tp_decode * s.parallelism.pp_decode);
  }

  void on_prefill_done(const SimEvent& e) {
    auto it = prefill_.finish(s_.queue, e);
    if (!it) return;
    for (const std::size_t r : it->prefill) {
      if (!finish_prefill_pass(r, p_pool_)) continue;
      const double delay = transfer_delay(r);
      rec(r).transfer_delay += delay;
      st(r).where = Where::kTransfer;
      s_.queue.push(now() + delay, EventKind::kTransferComplete, instance_, 0, r);
    }
  }

  void on_decode_done(const SimEvent& e) {
    auto it = decode_.finish(s_.queue, e);
    if (!it) return;
    finish_decode(it->decode, d_pool_);
  }

  double transfer_delay(std::size_t r) const {
    const auto& t = ecfg().transfer;
    if (t.kind == TransferMode::Kind::kBandwidth) {
      return static_cast<double>(kv_len(r)) * setup().cost.kv_bytes_per_token / t.bytes_per_second;
    }
    std::vector<std::int64_t> kv;
    kv.reserve(running_.size() + 1);
    for (const std::size_t q : running_) kv.push_back(kv_len(q));
    kv.push_back(kv_len(r));
    return decode_iter_latency(kv, setup().cost, setup().parallelism.tp_decode,
                               setup().parallelism.tp_efficiency, 100.0);
  }

  void drain_transfers() {
    while (!transfer_waiting_.empty()) {
      const std::size_t r = transfer_waiting_.front();
      const std::int64_t need = blocks(kv_len(r)) - d_pool_.allocated(r);
      if (need > 0 && !d_pool_.try_allocate(r, need)) {
        d_stats_.exhausted(now());
        return;
      }
      transfer_waiting_.pop_front();
      st(r).where = Where::kDecodeWaiting;
      decode_waiting_.push_back(r);
    }
  }

  void try_launch() {
    drain_transfers();
    while (prefill_.has_free_slot()) {
      Iteration it;
      it.prefill = take_prefill_batch(p_pool_, p_stats_);
      if (it.prefill.empty()) break;
      it.work = prefill_work_for(it.prefill, {}, setup().parallelism.tp_prefill);
      prefill_.launch(s_.queue, std::move(it));
    }
    while (decode_.has_free_slot()) {
      Iteration it;
      it.decode = take_decode_batch(d_pool_, d_stats_);
      if (it.decode.empty()) break;
      it.work = decode_work_for(it.decode, setup().parallelism.tp_decode);
      decode_.launch(s_.queue, std::move(it));
    }
    // A preemption on the decode side re-queues work for prefill.
    while (prefill_.has_free_slot() && !prefill_waiting_.empty()) {
      Iteration it;
      it.prefill = take_prefill_batch(p_pool_, p_stats_);
      if (it.prefill.empty()) break;
      it.work = prefill_work_for(it.prefill, {}, setup().parallelism.tp_prefill);
      prefill_.launch(s_.queue, std::move(it));
    }
  }

  KvPool p_pool_;
  KvPool d_pool_;
  PoolStats p_stats_;
  PoolStats d_stats_;
  Worker prefill_;
  Worker decode_;
  std::deque<std::size_t> transfer_waiting_;
};

}  // namespace

std::unique_ptr<InstanceEngine> make_disaggregated(Shared& s, std::uint32_t instance) {
  return std::make_unique<DisaggregatedEngine>(s, instance);
}

}  // namespace simpd::detail
