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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpd/engine.hpp"
#include "simpd/execution.hpp"
#include "simpd/metrics.hpp"
#include "simpd/workload.hpp"

namespace simpd {

// One experiment: workload source, engine setup, seed and output location.
// Exactly one of `workload` (generated) and `trace_file` is set.
struct ScenarioConfig {
  std::string name = "scenario";
  std::string label;  // engine column in summaries; defaults to the engine kind
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<TraceParams> workload;
  std::optional<std::filesystem::path> trace_file;
  SimulationSetup setup;
  double trim = 0.05;
  std::vector<double> sweep_rates;  // optional default for `sweep`
  double threshold = 0.9;
};

// Throws ConfigError whose field() is the dotted TOML path of the offender.
void validate(const ScenarioConfig& c);

// Relative trace paths resolve against `base_dir`.
ScenarioConfig parse_scenario(const std::string& toml_text,
                              const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Fully resolved config; parse_scenario(to_toml(c)) reproduces c.
std::string to_toml(const ScenarioConfig& c);

std::string engine_label(const ScenarioConfig& c);

// Trace for the scenario, optionally at another arrival rate (same seed).
Trace make_trace(const ScenarioConfig& c, std::optional<double> rate = std::nullopt);

struct RunOutput {
  SimulationResult sim;
  std::vector<RequestMetrics> rows;
  Summary summary;
};

RunOutput run_scenario(const ScenarioConfig& c, std::optional<double> rate = std::nullopt);

// requests.csv, summary.csv, controller.csv (semi-PD dynamic), pools.csv,
// switches.csv, events.digest, config.resolved.toml.
void write_run(const ScenarioConfig& c, const RunOutput& out, const std::filesystem::path& dir);

struct SweepResult {
  std::vector<Summary> rows;  // one per rate, ascending
  GoodputResult goodput;
};

// Runs the scenario at every rate. Runs are independent, so the parallel
// kernel distributes them over threads; rows are identical either way.
SweepResult sweep(const ScenarioConfig& c, std::span<const double> rates, double threshold,
                  Execution exec = Execution::kParallel);

std::string format_summary_csv(std::span<const Summary> rows);

// Concatenates summary tables; duplicate (engine, rate) keys are an error.
std::vector<Summary> merge_summaries(std::span<const std::vector<Summary>> tables);

// Long format `engine,rate,value` for one summary column.
std::string long_format(std::span<const Summary> rows, const std::string& metric);
const std::vector<std::string>& summary_metrics();

}  // namespace simpd
