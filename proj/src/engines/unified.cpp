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

// One simulated GPU shared by both phases; iterations run serially at 100%
// share (up to pp of them overlap as pipeline stages).
class UnifiedEngine final : public InstanceEngine {
 public:
  UnifiedEngine(Shared& s, std::uint32_t instance)
      : InstanceEngine(s, instance),
        pool_(capacity(s.setup), s.setup.kv.block_size),
        gpu_(instance, 0, s.setup.parallelism.pp_prefill, 1.0),
        tp_(s.setup.parallelism.tp_prefill) {}

  void admit(std::size_t r) override {
    enqueue_arrival(r);
    try_launch();
  }

  void on_event(const SimEvent& e) override {
    if (e.kind != EventKind::kIterationComplete) {
      throw ContractViolation(std::string("unified engine cannot handle ") + to_string(e.kind));
    }
    auto it = gpu_.finish(s_.queue, e);
    if (!it) return;
    for (std::size_t i = 0; i < it->prefill.size(); ++i) {
      const std::size_t r = it->prefill[i];
      if (chunked()) {
        auto& s = st(r);
        s.prefilled += it->chunk_tokens[i];
        s.in_flight = false;
        if (s.prefilled < s.prefill_target) continue;
        prefill_waiting_.erase(std::find(prefill_waiting_.begin(), prefill_waiting_.end(), r));
      }
      if (finish_prefill_pass(r, pool_)) {
        st(r).where = Where::kDecodeWaiting;
        decode_waiting_.push_back(r);
      }
    }
    finish_decode(it->decode, pool_);
    try_launch();
  }

  std::size_t waiting_depth() const override { return prefill_waiting_.size(); }
  double kv_utilization() override { return pool_.utilization(); }

  void report(std::vector<PoolReport>& out) const override {
    out.push_back({"i" + std::to_string(instance_), pool_.capacity(), pool_.high_water(),
                   stats_.first_exhaustion});
  }

 private:
  static std::int64_t capacity(const SimulationSetup& s) {
    if (s.kv.capacity_blocks) return *s.kv.capacity_blocks;
    return derived_capacity_blocks(s.kv, s.cost, s.parallelism.tp_prefill * s.parallelism.pp_prefill);
  }

  bool chunked() const { return ecfg().kind == EngineKind::kUnifiedChunked; }

  void try_launch() {
    while (gpu_.has_free_slot()) {
      Iteration it = build();
      if (it.empty()) return;
      gpu_.launch(s_.queue, std::move(it));
    }
  }

  Iteration build() {
    Iteration it;
    switch (ecfg().kind) {
      case EngineKind::kUnifiedPrefillFirst:
        it.prefill = take_prefill_batch(pool_, stats_);
        if (it.prefill.empty()) it.decode = take_decode_batch(pool_, stats_);
        break;
      case EngineKind::kUnifiedDecodeFirst:
        it.decode = take_decode_batch(pool_, stats_);
        if (it.decode.empty()) it.prefill = take_prefill_batch(pool_, stats_);
        break;
      default:
        build_mixed(it);
        return it;
    }
    if (!it.prefill.empty()) {
      it.work = prefill_work_for(it.prefill, {}, tp_);
    } else if (!it.decode.empty()) {
      it.work = decode_work_for(it.decode, tp_);
    }
    return it;
  }

  // Token budget of chunk_size: decode tokens first, then prefill chunks in
  // FCFS order starting with the head-of-line request.
  void build_mixed(Iteration& it) {
    auto budget = ecfg().chunk_size;
    it.decode = take_decode_batch(pool_, stats_, static_cast<std::size_t>(budget));
    budget -= static_cast<std::int64_t>(it.decode.size());
    std::vector<PrefillChunk> chunks;
    for (const std::size_t r : prefill_waiting_) {
      if (budget <= 0) break;
      auto& s = st(r);
      if (s.in_flight) continue;
      if (!s.pass_allocated) {
        const std::int64_t need = blocks(s.prefill_target) - pool_.allocated(r);
        if (need > 0 && !pool_.try_allocate(r, need)) {
          stats_.exhausted(now());
          break;
        }
        s.pass_allocated = true;
      }
      const std::int64_t take = std::min(s.prefill_target - s.prefilled, budget);
      budget -= take;
      s.in_flight = true;
      s.where = Where::kPrefilling;
      mark_scheduled(r);
      it.prefill.push_back(r);
      it.chunk_tokens.push_back(take);
      chunks.push_back({take, s.prefilled});
    }
    if (it.empty()) return;
    std::vector<std::int64_t> kv;
    for (const std::size_t r : it.decode) kv.push_back(kv_len(r));
    it.work = mixed_work(chunks, kv, setup().cost) /
              tp_speedup(tp_, setup().parallelism.tp_efficiency);
  }

  KvPool pool_;
  PoolStats stats_;
  Worker gpu_;
  std::int64_t tp_;
};

}  // namespace

std::unique_ptr<InstanceEngine> make_unified(Shared& s, std::uint32_t instance) {
  return std::make_unique<UnifiedEngine>(s, instance);
}

}  // namespace simpd::detail
