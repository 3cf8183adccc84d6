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

#include "simpd/kv_pool.hpp"

#include <string>

#include "simpd/error.hpp"

namespace simpd {

std::int64_t blocks_for_tokens(std::int64_t tokens, std::int64_t block_size) {
  if (tokens < 0) throw ContractViolation("negative token count");
  if (block_size < 1) throw ContractViolation("block_size must be >= 1");
  return (tokens + block_size - 1) / block_size;
}

KvPool::KvPool(std::int64_t capacity_blocks, std::int64_t block_size)
    : capacity_(capacity_blocks), block_size_(block_size), free_(capacity_blocks) {
  if (capacity_blocks < 1) throw ConfigError("kv.capacity_blocks", "must be >= 1");
  if (block_size < 1) throw ConfigError("kv.block_size", "must be >= 1");
}

bool KvPool::try_allocate(std::uint64_t request, std::int64_t n) {
  if (n <= 0) throw ContractViolation("try_allocate needs n >= 1, got " + std::to_string(n));
  std::lock_guard lock(mu_);
  if (free_ < n) return false;
  free_ -= n;
  allocations_[request] += n;
  observe_locked();
  return true;
}

std::int64_t KvPool::release(std::uint64_t request) {
  std::lock_guard lock(mu_);
  auto it = allocations_.find(request);
  if (it == allocations_.end()) {
    throw ContractViolation("release of request " + std::to_string(request) +
                            " which holds no blocks");
  }
  const std::int64_t n = it->second;
  free_ += n;
  allocations_.erase(it);
  return n;
}

double KvPool::utilization() {
  std::lock_guard lock(mu_);
  observe_locked();
  return static_cast<double>(capacity_ - free_) / static_cast<double>(capacity_);
}

void KvPool::observe_locked() {
  const double u = static_cast<double>(capacity_ - free_) / static_cast<double>(capacity_);
  if (u > high_water_) high_water_ = u;
}

std::int64_t KvPool::free_blocks() const {
  std::lock_guard lock(mu_);
  return free_;
}

std::int64_t KvPool::allocated(std::uint64_t request) const {
  std::lock_guard lock(mu_);
  auto it = allocations_.find(request);
  return it == allocations_.end() ? 0 : it->second;
}

bool KvPool::holds(std::uint64_t request) const {
  std::lock_guard lock(mu_);
  return allocations_.contains(request);
}

double KvPool::high_water() const {
  std::lock_guard lock(mu_);
  return high_water_;
}

std::map<std::uint64_t, std::int64_t> KvPool::allocations() const {
  std::lock_guard lock(mu_);
  return allocations_;
}

}  // namespace simpd
