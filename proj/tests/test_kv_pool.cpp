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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <numeric>
#include <random>
#include <thread>

#include "simpd/error.hpp"
#include "simpd/kv_pool.hpp"

using namespace simpd;

namespace {

std::int64_t held(const KvPool& p) {
  std::int64_t sum = 0;
  for (const auto& [id, n] : p.allocations()) sum += n;
  return sum;
}

}  // namespace

TEST_CASE("blocks_for_tokens rounds up") {
  CHECK(blocks_for_tokens(251, 16) == 16);
  CHECK(blocks_for_tokens(256, 16) == 16);
  CHECK(blocks_for_tokens(257, 16) == 17);
  CHECK(blocks_for_tokens(0, 16) == 0);
  CHECK_THROWS_AS(blocks_for_tokens(-1, 16), ContractViolation);
}

TEST_CASE("competing requests for more than half the pool") {
  KvPool p(10, 16);
  CHECK(p.try_allocate(1, 6));
  CHECK_FALSE(p.try_allocate(2, 6));
  CHECK(p.free_blocks() == 4);
  CHECK_FALSE(p.holds(2));
}

TEST_CASE("zero-block request is a contract violation") {
  KvPool p(10, 16);
  CHECK_THROWS_AS(p.try_allocate(1, 0), ContractViolation);
  CHECK_THROWS_AS(p.try_allocate(1, -3), ContractViolation);
}

TEST_CASE("grant, free, grant all") {
  KvPool p(10, 16);
  CHECK(p.try_allocate(1, 4));
  CHECK(p.release(1) == 4);
  CHECK(p.try_allocate(2, 10));
  CHECK(p.free_blocks() == 0);
}

TEST_CASE("release returns blocks and rejects unknown ids") {
  KvPool p(10, 16);
  REQUIRE(p.try_allocate(1, 5));
  REQUIRE(p.try_allocate(2, 3));
  CHECK(p.free_blocks() == 2);
  CHECK(p.release(1) == 5);
  CHECK(p.free_blocks() == 7);
  CHECK_THROWS_AS(p.release(1), ContractViolation);
  CHECK_THROWS_AS(p.release(42), ContractViolation);
}

TEST_CASE("growth accumulates per request") {
  KvPool p(10, 16);
  REQUIRE(p.try_allocate(7, 5));
  REQUIRE(p.try_allocate(7, 2));
  CHECK(p.allocated(7) == 7);
  CHECK(p.release(7) == 7);
  CHECK(p.allocated(7) == 0);
}

TEST_CASE("utilization and high-water mark") {
  KvPool p(100, 16);
  CHECK(p.utilization() == 0.0);
  REQUIRE(p.try_allocate(1, 75));
  CHECK(p.utilization() == doctest::Approx(0.75));
  p.release(1);
  CHECK(p.utilization() == 0.0);
  CHECK(p.high_water() == doctest::Approx(0.75));
}

TEST_CASE("random sequential operations conserve blocks") {
  std::mt19937_64 rng(17);
  KvPool p(64, 16);
  double hw = 0.0;
  std::uniform_int_distribution<int> op(0, 2), id(0, 9), n(1, 12);
  for (int i = 0; i < 20000; ++i) {
    const auto r = static_cast<std::uint64_t>(id(rng));
    if (op(rng) < 2) {
      const auto before = p.free_blocks();
      const auto want = n(rng);
      if (p.try_allocate(r, want)) {
        CHECK(p.free_blocks() == before - want);
      } else {
        CHECK(p.free_blocks() == before);
        CHECK(want > before);
      }
    } else if (p.holds(r)) {
      p.release(r);
    }
    CHECK(p.free_blocks() + held(p) == p.capacity());
    CHECK(p.free_blocks() >= 0);
    CHECK(p.high_water() >= hw);
    hw = p.high_water();
    CHECK(hw <= 1.0);
  }
}

TEST_CASE("concurrent allocators never overcommit") {
  KvPool p(1000, 16);
  std::atomic<std::int64_t> granted{0};
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t) {
    ts.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) {
        if (p.try_allocate(static_cast<std::uint64_t>(t * 1000 + i), 3)) granted += 3;
      }
    });
  }
  for (auto& t : ts) t.join();
  CHECK(granted.load() == 999);
  CHECK(p.free_blocks() == 1);
  CHECK(held(p) == 999);
}
