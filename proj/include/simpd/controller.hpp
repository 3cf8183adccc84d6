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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simpd/execution.hpp"
#include "simpd/resource_model.hpp"

namespace simpd {

struct SloConfig {
  double ttft_slo = 0.3;    // seconds
  double tpot_slo = 0.15;   // seconds
  double percentile = 0.9;  // fraction in (0, 1]
};

void validate(const SloConfig& s);

struct ControllerConfig {
  std::int64_t window_size = 200;  // decode iterations per adjustment
  std::int64_t max_step = 6;
  double step_size = 5.0;  // percent
};

void validate(const ControllerConfig& c);

// TTFT(x') = a1 / (x' - lambda) + b1 ;  TPOT(y') = a2 / y' + b2.
// Shares are normalized percentages.
struct LatencyModel {
  double a1 = 0.0;
  double b1 = 0.0;
  double lambda = 0.0;
  double a2 = 0.0;
  double b2 = 0.0;
  double r2_ttft = 0.0;
  double r2_tpot = 0.0;
  bool ttft_fitted = false;
  bool tpot_fitted = false;
  bool degraded = false;  // a negative slope was clamped to zero
};

// Analytic model from queueing theory. A single-server queue with service
// time l_x = (100 / x) * l100 and Poisson arrivals at `rate` has exponential
// sojourn time with mean 100 * l100 / (x - 100 * rate * l100); its p-quantile
// scales that mean by -ln(1 - p). Decode latency follows l_y directly.
LatencyModel analytic_model(double rate, double prefill_l100_per_request,
                            double decode_l100_per_iteration, double percentile);

struct Observation {
  std::uint64_t window = 0;
  double x_norm = 50.0;
  double y_norm = 50.0;
  std::optional<double> ttft_p;
  std::optional<double> tpot_p;
  std::size_t ttft_samples = 0;
  std::size_t tpot_samples = 0;
};

// x' = 100 x / (x + y), y' = 100 y / (x + y).
std::pair<double, double> normalized_shares(const PartitionConfig& p);

struct WindowLatency {
  std::optional<double> ttft;
  std::optional<double> tpot;
};

// Nearest-rank p-th percentile of each side; an empty side yields nullopt.
WindowLatency observe_window(std::span<const double> ttfts, std::span<const double> tpots,
                             double p);

// Least-squares line y = a * u + b with its residual sum of squares.
struct LineFit {
  double a = 0.0;
  double b = 0.0;
  double rss = 0.0;
  double r2 = 0.0;
};

LineFit fit_line(std::span<const double> u, std::span<const double> y);

// Residual sum of squares of ttft ~ a / (x - lambda) + b for every lambda in
// `lambdas`. The parallel and serial kernels return identical vectors.
std::vector<double> lambda_grid_rss(std::span<const double> x, std::span<const double> ttft,
                                    std::span<const double> lambdas, Execution exec);

inline constexpr double kLambdaGridStep = 0.25;
inline constexpr double kLambdaMargin = 0.5;

// Fits both sides from the observation history. A side with fewer than two
// distinct shares keeps the value from `previous`.
LatencyModel fit_latency_model(std::span<const Observation> history,
                               const LatencyModel& previous,
                               Execution exec = Execution::kParallel);

// nullopt means saturated (x_norm <= lambda): the queue is unstable.
std::optional<double> estimate_ttft(const LatencyModel& m, double x_norm);
double estimate_tpot(const LatencyModel& m, double y_norm);

enum class AdjustAction {
  kGated,       // iter is not a window boundary
  kBothFail,    // no space for adjustment
  kPass,        // both SLOs hold
  kIncreaseX,   // TTFT failed
  kIncreaseY,   // TPOT failed
};

const char* to_string(AdjustAction a);

struct AdjustResult {
  PartitionConfig next;
  AdjustAction action = AdjustAction::kGated;
  std::int64_t steps = 0;
  bool blocked = false;  // a step would have driven the other share to <= 0
};

// One invocation of the SLO-aware adjusting loop. Branches use the observed
// percentiles; the while-loops use the model estimates.
AdjustResult adjust_partition_detailed(std::uint64_t iter, const PartitionConfig& current,
                                       const SloConfig& slo, const ControllerConfig& cfg,
                                       const LatencyModel& model, const Observation& obs);

PartitionConfig adjust_partition(std::uint64_t iter, const PartitionConfig& current,
                                 const SloConfig& slo, const ControllerConfig& cfg,
                                 const LatencyModel& model, const Observation& obs);

struct ControllerLogRow {
  std::uint64_t window = 0;
  double x = 0.0;
  double y = 0.0;
  double x_norm = 0.0;
  double y_norm = 0.0;
  std::optional<double> ttft_p;
  std::optional<double> tpot_p;
  std::optional<double> est_ttft;  // nullopt when saturated
  double est_tpot = 0.0;
  std::string action;
};

// Stateful wrapper used by the semi-PD engine: owns the observation history
// and the current model, and emits one log row per window.
class PartitionController {
 public:
  struct WindowInput {
    std::uint64_t iter = 0;
    PartitionConfig current;  // partition requested at the previous window
    std::vector<double> ttfts;
    std::vector<double> tpots;
    double window_seconds = 0.0;
    std::size_t arrivals = 0;
    double prefill_l100_per_request = 0.0;   // measured, 0 when no prefill ran
    double decode_l100_per_iteration = 0.0;  // measured, 0 when no decode ran
  };

  PartitionController(SloConfig slo, ControllerConfig cfg, std::size_t history_limit = 32);

  // Returns the partition to switch to (equal to input.current when holding).
  PartitionConfig on_window(const WindowInput& input);

  const std::vector<ControllerLogRow>& log() const noexcept { return log_; }
  const LatencyModel& model() const noexcept { return model_; }

 private:
  SloConfig slo_;
  ControllerConfig cfg_;
  std::size_t history_limit_;
  std::vector<Observation> history_;
  LatencyModel model_;
  std::vector<ControllerLogRow> log_;
  std::uint64_t window_ = 0;
};

std::string controller_log_header();
std::string format_controller_row(const ControllerLogRow& row);
std::vector<ControllerLogRow> parse_controller_log(const std::string& text);

}  // namespace simpd
