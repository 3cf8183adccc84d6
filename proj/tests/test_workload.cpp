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

#include <cmath>
#include <numeric>

#include "simpd/error.hpp"
#include "simpd/workload.hpp"

using namespace simpd;

namespace {

TraceParams constant_params(double rate, std::int64_t count, std::uint64_t seed) {
  TraceParams p;
  p.rate = rate;
  p.count = count;
  p.seed = seed;
  p.input = dist::Constant{251};
  p.output = dist::Constant{200};
  return p;
}

}  // namespace

TEST_CASE("mean inter-arrival gap matches 1/rate") {
  const Trace t = generate_trace(constant_params(2.0, 1000, 7));
  REQUIRE(t.size() == 1000);
  const double mean_gap = t.back().arrival / 1000.0;
  CHECK(std::abs(mean_gap - 0.5) / 0.5 < 0.05);
}

TEST_CASE("constant lengths are reproduced exactly") {
  for (const auto& r : generate_trace(constant_params(4.0, 200, 1))) {
    CHECK(r.input_len == 251);
    CHECK(r.output_len == 200);
  }
}

TEST_CASE("mixture fraction concentrates around its weight") {
  TraceParams p = constant_params(10.0, 10000, 5);
  p.mixture = {MixtureComponent{0.95, LengthDist{dist::Constant{251}}, std::nullopt},
               MixtureComponent{0.05, LengthDist{dist::Constant{4096}}, std::nullopt}};
  const Trace t = generate_trace(p);
  const auto irregular = std::count_if(t.begin(), t.end(), [](const Request& r) { return r.input_len == 4096; });
  const double frac = static_cast<double>(irregular) / 10000.0;
  CHECK(frac >= 0.04);
  CHECK(frac <= 0.06);
}

TEST_CASE("generation is a pure function of the parameters") {
  TraceParams p = preset("heterogeneous");
  p.rate = 3.0;
  p.count = 500;
  p.seed = 99;
  const Trace a = generate_trace(p);
  const Trace b = generate_trace(p);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].arrival == b[i].arrival);
    CHECK(a[i].input_len == b[i].input_len);
    CHECK(a[i].output_len == b[i].output_len);
  }
  p.seed = 100;
  CHECK(generate_trace(p)[0].arrival != a[0].arrival);
}

TEST_CASE("arrival counts per window have mean rate*T") {
  // 10^4 arrivals at rate 5: count in windows of T = 10 s is Poisson(50).
  const Trace t = generate_trace(constant_params(5.0, 10000, 21));
  const double T = 10.0;
  const auto windows = static_cast<std::size_t>(std::floor(t.back().arrival / T));
  std::vector<double> counts(windows, 0.0);
  for (const auto& r : t) {
    const auto w = static_cast<std::size_t>(r.arrival / T);
    if (w < windows) counts[w] += 1.0;
  }
  const double mean = std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(windows);
  const double se = std::sqrt(5.0 * T / static_cast<double>(windows));
  CHECK(std::abs(mean - 5.0 * T) <= 3.0 * se);
}

TEST_CASE("arrivals are nondecreasing and lengths respect the clamp") {
  TraceParams p = preset("sharegpt-like");
  p.count = 5000;
  p.max_len = 1024;
  p.seed = 4;
  const Trace t = generate_trace(p);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(t[i].id == i);
    if (i > 0) CHECK(t[i].arrival >= t[i - 1].arrival);
    CHECK(t[i].input_len >= 1);
    CHECK(t[i].input_len <= 1024);
    CHECK(t[i].output_len >= 1);
    CHECK(t[i].output_len <= 1024);
  }
}

TEST_CASE("sharegpt-like preset has an input mean near 251") {
  TraceParams p = preset("sharegpt-like");
  p.count = 40000;
  p.seed = 8;
  const Trace t = generate_trace(p);
  double in = 0, out = 0;
  for (const auto& r : t) {
    in += static_cast<double>(r.input_len);
    out += static_cast<double>(r.output_len);
  }
  CHECK(in / 40000.0 == doctest::Approx(251).epsilon(0.05));
  CHECK(out / 40000.0 == doctest::Approx(200).epsilon(0.05));
}

TEST_CASE("lognormal_with_mean produces the requested mean") {
  const auto d = lognormal_with_mean(251.0, 1.0);
  CHECK(std::exp(d.mu + 0.5 * d.sigma * d.sigma) == doctest::Approx(251.0));
}

TEST_CASE("invalid parameters are rejected with field paths") {
  TraceParams p = constant_params(1.0, 10, 0);
  p.input = dist::Uniform{10, 5};
  try {
    validate(p);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "workload.input");
  }
  p = constant_params(0.0, 10, 0);
  CHECK_THROWS_AS(generate_trace(p), ConfigError);
  p = constant_params(1.0, 0, 0);
  CHECK_THROWS_AS(generate_trace(p), ConfigError);
  p = constant_params(1.0, 10, 0);
  p.mixture = {MixtureComponent{0.5, std::nullopt, std::nullopt},
               MixtureComponent{0.4, std::nullopt, std::nullopt}};
  CHECK_THROWS_AS(validate(p), ConfigError);
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("empirical histogram samples only its support") {
  TraceParams p = constant_params(1.0, 2000, 3);
  p.input = dist::Empirical{{{100, 1}, {300, 3}}};
  int small = 0;
  for (const auto& r : generate_trace(p)) {
    CHECK((r.input_len == 100 || r.input_len == 300));
    small += r.input_len == 100;
  }
  CHECK(small / 2000.0 == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("trace CSV parses rows in order") {
  const auto t = parse_trace("arrival_s,input_tokens,output_tokens\n0.0,10,5\n0.5,20,8\n");
  REQUIRE(t.requests.size() == 2);
  CHECK(t.requests[0].arrival == 0.0);
  CHECK(t.requests[1].arrival == 0.5);
  CHECK(t.requests[1].input_len == 20);
  CHECK(t.requests[1].output_len == 8);
  CHECK_FALSE(t.resorted);
}

TEST_CASE("empty trace file gives an empty trace") {
  CHECK(parse_trace("").requests.empty());
  CHECK(parse_trace("arrival_s,input_tokens,output_tokens\n").requests.empty());
}

TEST_CASE("malformed rows name their line") {
  try {
    parse_trace("arrival_s,input_tokens,output_tokens\n0.0,10,5\n0.5,20,0\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_trace("arrival_s,input_tokens,output_tokens\n1.0,abc,2\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace("arrival,in,out\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace("arrival_s,input_tokens,output_tokens\n1.0,2\n"), ConfigError);
}

TEST_CASE("non-monotone arrivals are re-sorted and flagged") {
  const auto t = parse_trace("arrival_s,input_tokens,output_tokens\n1.0,1,1\n0.5,2,2\n0.5,3,3\n");
  CHECK(t.resorted);
  REQUIRE(t.requests.size() == 3);
  CHECK(t.requests[0].input_len == 2);
  CHECK(t.requests[1].input_len == 3);
  CHECK(t.requests[2].input_len == 1);
  CHECK(t.requests[2].id == 2);
}

TEST_CASE("generated traces round-trip through CSV bit-exactly") {
  TraceParams p = preset("heterogeneous");
  p.count = 3000;
  p.rate = 7.3;
  p.seed = 12;
  const Trace a = generate_trace(p);
  const auto b = parse_trace(format_trace(a));
  REQUIRE(b.requests.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].arrival == b.requests[i].arrival);
    CHECK(a[i].input_len == b.requests[i].input_len);
    CHECK(a[i].output_len == b.requests[i].output_len);
  }
  CHECK(format_trace(b.requests) == format_trace(a));
}
