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
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace simpd {

struct Request {
  std::uint64_t id = 0;
  double arrival = 0.0;  // seconds
  std::int64_t input_len = 1;
  std::int64_t output_len = 1;
};

using Trace = std::vector<Request>;

namespace dist {

struct Constant {
  double value = 1.0;
};
struct Uniform {
  double lo = 1.0;
  double hi = 1.0;
};
// Lognormal in natural-log space; samples are clamped to [1, max_len].
struct Lognormal {
  double mu = 0.0;
  double sigma = 1.0;
};
// Discrete histogram: (value, weight) pairs, weights need not be normalized.
struct Empirical {
  std::vector<std::pair<double, double>> bins;
};

}  // namespace dist

using LengthDist =
    std::variant<dist::Constant, dist::Uniform, dist::Lognormal, dist::Empirical>;

// Lognormal whose (unclamped) mean equals `mean`.
dist::Lognormal lognormal_with_mean(double mean, double sigma);

struct MixtureComponent {
  double weight = 1.0;
  std::optional<LengthDist> input;   // overrides TraceParams::input when set
  std::optional<LengthDist> output;  // overrides TraceParams::output when set
};

struct TraceParams {
  double rate = 1.0;  // requests per second
  std::int64_t count = 1;
  LengthDist input = dist::Constant{251};
  LengthDist output = dist::Constant{200};
  std::vector<MixtureComponent> mixture;
  std::int64_t max_len = 8192;
  std::uint64_t seed = 0;
};

// Throws ConfigError with a descriptive message on invalid parameters.
void validate(const TraceParams& p);

// Poisson arrivals at p.rate; lengths drawn per descriptor (or mixture
// component). Arrival times are rounded to whole nanoseconds so that the CSV
// form at 9 decimals reloads to identical doubles.
Trace generate_trace(const TraceParams& p);

// Named length presets: "sharegpt-like", "longbench-like", "heterogeneous".
TraceParams preset(const std::string& name);
std::vector<std::string> preset_names();

struct LoadedTrace {
  Trace requests;
  bool resorted = false;  // input arrivals were not monotone
};

// Reads `arrival_s,input_tokens,output_tokens` (header required). Malformed
// rows raise ConfigError naming the 1-based line number.
LoadedTrace load_trace(const std::filesystem::path& path);
LoadedTrace parse_trace(const std::string& text);

void write_trace(const std::filesystem::path& path, const Trace& trace);
std::string format_trace(const Trace& trace);

}  // namespace simpd
