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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpd/record.hpp"

namespace simpd {

struct SloConfig;

// Latencies are rounded to whole nanoseconds so the per-request CSV reloads to
// identical values and summaries regenerate exactly.
struct RequestMetrics {
  std::uint64_t id = 0;
  double arrival = 0.0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double ttft = 0.0;
  std::optional<double> tpot;  // none when output_tokens < 2
  double e2e = 0.0;
  std::int64_t preemptions = 0;
};

// Throws ContractViolation for a record that has not completed.
RequestMetrics per_request_metrics(const RequestRecord& rec);
std::vector<RequestMetrics> per_request_metrics(std::span<const RequestRecord> recs);

// Nearest rank: the element at 1-based index ceil(p * n) of the sorted values.
double percentile(std::vector<double> values, double p);

// Fraction of requests with ttft <= S_p and (tpot <= S_d or no tpot).
double slo_attainment(std::span<const RequestMetrics> rows, const SloConfig& slo);

struct Summary {
  std::string engine;
  double rate = 0.0;
  double p50_ttft = 0.0, p90_ttft = 0.0, p99_ttft = 0.0;
  double p50_tpot = 0.0, p90_tpot = 0.0, p99_tpot = 0.0;  // NaN when no tpot samples
  double attainment = 0.0;
  double mean_e2e = 0.0;
};

// Drops the first and last `trim` fraction of requests (by id) before
// computing percentiles, attainment, and mean latency.
Summary summarize(std::span<const RequestMetrics> rows, const std::string& engine, double rate,
                  const SloConfig& slo, double trim = 0.05);

struct GoodputResult {
  double rate = 0.0;        // 0 when no rate qualifies
  bool monotone = true;     // attainment nonincreasing in rate
};

// Largest rate whose attainment >= threshold. `rates` must be ascending.
GoodputResult max_goodput(std::span<const double> rates, std::span<const double> attainments,
                          double threshold);

std::string requests_csv_header();
std::string format_requests_csv(std::span<const RequestMetrics> rows);
std::vector<RequestMetrics> parse_requests_csv(const std::string& text);

std::string summary_csv_header();
std::string format_summary_row(const Summary& s);
std::vector<Summary> parse_summary_csv(const std::string& text);

}  // namespace simpd
