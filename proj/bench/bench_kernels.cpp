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

// Serial reference against the OpenMP kernels: the rate sweep and the lambda
// grid of the latency-model fit.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "simpd/controller.hpp"
#include "simpd/scenario.hpp"

using namespace simpd;

namespace {

ScenarioConfig bench_scenario() {
  ScenarioConfig c;
  TraceParams p = preset("sharegpt-like");
  p.count = 500;
  p.seed = 7;
  c.workload = p;
  c.setup.engine.kind = EngineKind::kSemiPd;
  return c;
}

void BM_Sweep(benchmark::State& state) {
  const auto exec = state.range(0) ? Execution::kParallel : Execution::kSerial;
  const auto c = bench_scenario();
  const std::vector<double> rates{2, 4, 6, 8, 10, 12, 14, 16};
  for (auto _ : state) {
    benchmark::DoNotOptimize(sweep(c, rates, 0.9, exec));
  }
  state.SetLabel(exec == Execution::kParallel ? "parallel" : "serial");
}

void BM_LambdaGrid(benchmark::State& state) {
  const auto exec = state.range(0) ? Execution::kParallel : Execution::kSerial;
  std::vector<double> x, ttft, lambdas;
  for (double s = 20; s <= 95; s += 2.5) {
    x.push_back(s);
    ttft.push_back(4.0 / (s - 12.3) + 0.03);
  }
  for (double l = -400; l < 19.5; l += kLambdaGridStep) lambdas.push_back(l);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lambda_grid_rss(x, ttft, lambdas, exec));
  }
  state.SetLabel(exec == Execution::kParallel ? "parallel" : "serial");
}

}  // namespace

BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LambdaGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
