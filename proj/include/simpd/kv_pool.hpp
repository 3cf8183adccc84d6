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
#include <map>
#include <mutex>

namespace simpd {

// ceil(tokens / block_size); 0 tokens -> 0 blocks.
std::int64_t blocks_for_tokens(std::int64_t tokens, std::int64_t block_size);

// Paged KV block pool shared by every worker of an instance.
//
// The query / get / update sequence of an allocation runs under one lock, so
// two workers allocating concurrently can never both observe the same free
// count and overcommit the pool. Every public member is linearizable.
class KvPool {
 public:
  KvPool(std::int64_t capacity_blocks, std::int64_t block_size);

  KvPool(const KvPool&) = delete;
  KvPool& operator=(const KvPool&) = delete;

  // Grants `n` more blocks to `request` (growing an existing allocation) or
  // leaves the pool untouched and returns false. n <= 0 is a contract violation.
  bool try_allocate(std::uint64_t request, std::int64_t n);

  // Frees every block held by `request`; returns the count. Unknown ids throw.
  std::int64_t release(std::uint64_t request);

  // (capacity - free) / capacity. Also folds the value into high_water().
  double utilization();

  std::int64_t capacity() const noexcept { return capacity_; }
  std::int64_t block_size() const noexcept { return block_size_; }
  std::int64_t free_blocks() const;
  std::int64_t allocated(std::uint64_t request) const;  // 0 when absent
  bool holds(std::uint64_t request) const;
  double high_water() const;
  std::map<std::uint64_t, std::int64_t> allocations() const;

 private:
  void observe_locked();

  const std::int64_t capacity_;
  const std::int64_t block_size_;
  mutable std::mutex mu_;
  std::int64_t free_;
  std::map<std::uint64_t, std::int64_t> allocations_;
  double high_water_ = 0.0;
};

}  // namespace simpd
