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
#include <array>

#include "engine_impl.hpp"
#include "simpd/error.hpp"

namespace simpd::detail {

namespace {

constexpr std::size_t kPrefill = 0;
constexpr std::size_t kDecode = 1;

// Prefill and decode workers on the same GPUs, each capped at its share of
// compute, over one unified KV pool. Partition switches are prepared in the
// background and adopted by each worker at its next iteration boundary.
class SemiPdEngine final : public InstanceEngine {
 public:
  SemiPdEngine(Shared& s, std::uint32_t instance)
      : InstanceEngine(s, instance),
        pool_(capacity(s.setup), s.setup.kv.block_size),
        workers_{Worker(instance, kPrefill, s.setup.parallelism.pp_prefill, 1.0),
                 Worker(instance, kDecode, s.setup.parallelism.pp_decode, 1.0)},
        part_{s.setup.engine.initial_partition, s.setup.engine.initial_partition},
        target_(s.setup.engine.initial_partition),
        ctrl_(s.setup.slo, s.setup.controller) {
    update_rates();
  }

  void admit(std::size_t r) override {
    enqueue_arrival(r);
    ++win_arrivals_;
    try_launch();
  }

  void on_event(const SimEvent& e) override {
    switch (e.kind) {
      case EventKind::kIterationComplete: {
        const auto w = static_cast<std::size_t>(e.payload);
        auto it = workers_.at(w).finish(s_.queue, e);
        if (!it) return;
        if (w == kPrefill) {
          on_prefill_done(*it);
        } else {
          on_decode_done(*it);
        }
        adopt(w);
        break;
      }
      case EventKind::kSwitchPrepared:
        if (!pending_ || e.payload != pending_->generation) return;
        pending_->prepared = true;
        for (std::size_t w = 0; w < workers_.size(); ++w) {
          if (!workers_[w].active()) adopt(w);
        }
        break;
      case EventKind::kControllerTick:
        if (e.token == kScheduledSwitchToken) {
          request_switch(ecfg().switch_schedule.at(e.payload).partition);
        } else {
          on_window();
        }
        break;
      default:
        throw ContractViolation(std::string("semi-PD engine cannot handle ") + to_string(e.kind));
    }
    update_rates();
    try_launch();
  }

  std::size_t waiting_depth() const override { return prefill_waiting_.size(); }
  double kv_utilization() override { return pool_.utilization(); }

  void report(std::vector<PoolReport>& out) const override {
    out.push_back({"i" + std::to_string(instance_), pool_.capacity(), pool_.high_water(),
                   stats_.first_exhaustion});
  }

  const std::vector<ControllerLogRow>* controller_log() const override {
    return ecfg().dynamic ? &ctrl_.log() : nullptr;
  }

 private:
  struct Pending {
    PartitionConfig partition;
    double requested = 0.0;
    std::uint64_t generation = 0;
    bool prepared = false;
  };

  // Weights are charged once: both workers live on the same GPUs.
  static std::int64_t capacity(const SimulationSetup& s) {
    if (s.kv.capacity_blocks) return *s.kv.capacity_blocks;
    return derived_capacity_blocks(s.kv, s.cost, s.parallelism.tp_prefill * s.parallelism.pp_prefill);
  }

  void on_prefill_done(const Iteration& it) {
    win_prefill_work_ += it.work;
    win_prefill_reqs_ += it.prefill.size();
    for (const std::size_t r : it.prefill) {
      const bool first = std::isnan(rec(r).prefill_done);
      const bool more = finish_prefill_pass(r, pool_);
      if (first) win_ttfts_.push_back(rec(r).prefill_done - rec(r).request.arrival);
      if (!more) continue;
      st(r).where = Where::kDecodeWaiting;
      decode_waiting_.push_back(r);
    }
  }

  void on_decode_done(const Iteration& it) {
    win_decode_work_ += it.work;
    ++win_decode_iters_;
    ++decode_iters_;
    finish_decode(it.decode, pool_);
    for (const std::size_t r : it.decode) {
      const auto& rc = rec(r);
      if (st(r).where == Where::kDone && rc.request.output_len >= 2) {
        win_tpots_.push_back((rc.completed - rc.prefill_done) /
                             static_cast<double>(rc.request.output_len - 1));
      }
    }
    const auto window = static_cast<std::uint64_t>(setup().controller.window_size);
    if (ecfg().dynamic && decode_iters_ % window == 0) {
      s_.queue.push(now(), EventKind::kControllerTick, instance_, decode_iters_, 0);
    }
  }

  void on_window() {
    PartitionController::WindowInput in;
    in.iter = decode_iters_;
    in.current = target_;
    in.ttfts = std::move(win_ttfts_);
    in.tpots = std::move(win_tpots_);
    in.window_seconds = now() - win_start_;
    in.arrivals = win_arrivals_;
    if (win_prefill_reqs_ > 0) {
      in.prefill_l100_per_request = win_prefill_work_ / static_cast<double>(win_prefill_reqs_);
    }
    if (win_decode_iters_ > 0) {
      in.decode_l100_per_iteration = win_decode_work_ / static_cast<double>(win_decode_iters_);
    }
    win_ttfts_.clear();
    win_tpots_.clear();
    win_start_ = now();
    win_arrivals_ = 0;
    win_prefill_work_ = win_decode_work_ = 0.0;
    win_prefill_reqs_ = win_decode_iters_ = 0;

    const PartitionConfig next = ctrl_.on_window(in);
    if (!(next == target_)) request_switch(next);
  }

  void request_switch(const PartitionConfig& p) {
    validate(p);
    target_ = p;
    pending_ = Pending{p, now(), ++generation_, false};
    s_.queue.push(now() + ecfg().switch_prep_delay, EventKind::kSwitchPrepared, instance_,
                  generation_);
  }

  void adopt(std::size_t w) {
    if (!pending_ || !pending_->prepared || adopted_[w] == pending_->generation) return;
    part_[w] = pending_->partition;
    adopted_[w] = pending_->generation;
    s_.switches.push_back({pending_->requested, now(), instance_,
                           w == kPrefill ? "prefill" : "decode", pending_->partition});
    const std::size_t other = 1 - w;
    if (adopted_[other] == pending_->generation) {
      s_.max_mixed_overlap = std::max(s_.max_mixed_overlap, now() - first_adopt_);
      pending_.reset();
    } else {
      first_adopt_ = now();
    }
  }

  // A lone active worker runs at its own cap; two active workers split the
  // GPU according to the effective shares.
  void update_rates() {
    const bool pa = workers_[kPrefill].active();
    const bool da = workers_[kDecode].active();
    double xp = part_[kPrefill].x;
    double yd = part_[kDecode].y;
    if (pa && da) std::tie(xp, yd) = effective_shares({xp, yd});
    workers_[kPrefill].set_rate(s_.queue, xp / 100.0);
    workers_[kDecode].set_rate(s_.queue, yd / 100.0);
  }

  bool stalled() const {
    return ecfg().naive_switch && pending_ && !pending_->prepared;
  }

  void try_launch() {
    if (stalled()) return;
    bool launched = false;
    auto& d = workers_[kDecode];
    while (d.has_free_slot()) {
      Iteration it;
      it.decode = take_decode_batch(pool_, stats_);
      if (it.decode.empty()) break;
      it.work = decode_work_for(it.decode, setup().parallelism.tp_decode);
      d.launch(s_.queue, std::move(it));
      launched = true;
    }
    auto& p = workers_[kPrefill];
    while (p.has_free_slot()) {
      Iteration it;
      it.prefill = take_prefill_batch(pool_, stats_);
      if (it.prefill.empty()) break;
      it.work = prefill_work_for(it.prefill, {}, setup().parallelism.tp_prefill);
      p.launch(s_.queue, std::move(it));
      launched = true;
    }
    if (launched) update_rates();
  }

  KvPool pool_;
  PoolStats stats_;
  std::array<Worker, 2> workers_;
  std::array<PartitionConfig, 2> part_;  // partition each worker currently runs
  std::array<std::uint64_t, 2> adopted_{0, 0};
  PartitionConfig target_;
  std::optional<Pending> pending_;
  std::uint64_t generation_ = 0;
  double first_adopt_ = 0.0;

  PartitionController ctrl_;
  std::uint64_t decode_iters_ = 0;
  double win_start_ = 0.0;
  std::size_t win_arrivals_ = 0;
  std::vector<double> win_ttfts_;
  std::vector<double> win_tpots_;
  double win_prefill_work_ = 0.0;
  double win_decode_work_ = 0.0;
  std::size_t win_prefill_reqs_ = 0;
  std::size_t win_decode_iters_ = 0;
};

}  // namespace

std::unique_ptr<InstanceEngine> make_semi_pd(Shared& s, std::uint32_t instance) {
  return std::make_unique<SemiPdEngine>(s, instance);
}

}  // namespace simpd::detail
