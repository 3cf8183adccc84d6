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

#include "simpd/controller.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "simpd/error.hpp"
#include "simpd/metrics.hpp"

#ifdef SIMPD_HAVE_OPENMP
#include <omp.h>
#endif

namespace simpd {

int max_threads() {
#ifdef SIMPD_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void validate(const SloConfig& s) {
  if (!(s.ttft_slo > 0.0)) throw ConfigError("slo.ttft", "must be > 0");
  if (!(s.tpot_slo > 0.0)) throw ConfigError("slo.tpot", "must be > 0");
  if (!(s.percentile > 0.0 && s.percentile <= 1.0)) {
    throw ConfigError("slo.percentile", "must lie in (0, 1]");
  }
}

void validate(const ControllerConfig& c) {
  if (c.window_size <= 0) throw ConfigError("controller.window_size", "must be > 0");
  if (c.max_step <= 0) throw ConfigError("controller.max_step", "must be > 0");
  if (!(c.step_size > 0.0)) throw ConfigError("controller.step_size", "must be > 0");
}

LatencyModel analytic_model(double rate, double prefill_l100_per_request,
                            double decode_l100_per_iteration, double percentile) {
  const double p = std::min(percentile, 0.999);
  LatencyModel m;
  m.a1 = -std::log(1.0 - p) * 100.0 * prefill_l100_per_request;
  m.lambda = 100.0 * rate * prefill_l100_per_request;
  m.b1 = 0.0;
  m.a2 = 100.0 * decode_l100_per_iteration;
  m.b2 = 0.0;
  return m;
}

std::pair<double, double> normalized_shares(const PartitionConfig& p) {
  const double sum = p.x + p.y;
  return {100.0 * p.x / sum, 100.0 * p.y / sum};
}

WindowLatency observe_window(std::span<const double> ttfts, std::span<const double> tpots,
                             double p) {
  WindowLatency out;
  if (!ttfts.empty()) out.ttft = percentile({ttfts.begin(), ttfts.end()}, p);
  if (!tpots.empty()) out.tpot = percentile({tpots.begin(), tpots.end()}, p);
  return out;
}

LineFit fit_line(std::span<const double> u, std::span<const double> y) {
  const std::size_t n = u.size();
  if (n == 0 || n != y.size()) throw ContractViolation("fit_line needs matching nonempty inputs");
  double mu = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu += u[i];
    my += y[i];
  }
  mu /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (u[i] - mu) * (u[i] - mu);
    sxy += (u[i] - mu) * (y[i] - my);
    tss += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.a = sxx > 0.0 ? sxy / sxx : 0.0;
  f.b = my - f.a * mu;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.a * u[i] + f.b);
    f.rss += r * r;
  }
  f.r2 = tss > 0.0 ? 1.0 - f.rss / tss : (f.rss <= 1e-30 ? 1.0 : 0.0);
  return f;
}

namespace {

LineFit fit_at_lambda(std::span<const double> x, std::span<const double> ttft, double lambda) {
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = 1.0 / (x[i] - lambda);
  return fit_line(u, ttft);
}

std::size_t distinct_count(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> lambda_grid_rss(std::span<const double> x, std::span<const double> ttft,
                                    std::span<const double> lambdas, Execution exec) {
  std::vector<double> rss(lambdas.size());
  const auto n = static_cast<std::int64_t>(lambdas.size());
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      rss[static_cast<std::size_t>(i)] = fit_at_lambda(x, ttft, lambdas[static_cast<std::size_t>(i)]).rss;
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      rss[static_cast<std::size_t>(i)] = fit_at_lambda(x, ttft, lambdas[static_cast<std::size_t>(i)]).rss;
    }
  }
  return rss;
}

LatencyModel fit_latency_model(std::span<const Observation> history, const LatencyModel& previous,
                               Execution exec) {
  LatencyModel m = previous;
  m.degraded = false;

  std::vector<double> xs, ttfts, ys, tpots;
  for (const auto& o : history) {
    if (o.ttft_p) {
      xs.push_back(o.x_norm);
      ttfts.push_back(*o.ttft_p);
    }
    if (o.tpot_p) {
      ys.push_back(o.y_norm);
      tpots.push_back(*o.tpot_p);
    }
  }

  if (distinct_count(ys) >= 2) {
    std::vector<double> u(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) u[i] = 1.0 / ys[i];
    LineFit f = fit_line(u, tpots);
    if (f.a < 0.0) {
      double mean = 0.0;
      for (double t : tpots) mean += t;
      f.a = 0.0;
      f.b = mean / static_cast<double>(tpots.size());
      f.r2 = 0.0;
      m.degraded = true;
    }
    m.a2 = f.a;
    m.b2 = f.b;
    m.r2_tpot = f.r2;
    m.tpot_fitted = true;
  }

  if (distinct_count(xs) >= 2) {
    const double min_x = *std::min_element(xs.begin(), xs.end());
    const double hi = min_x - kLambdaMargin;
    std::vector<double> lambdas{0.0};
    if (hi > 0.0) {
      const auto steps = static_cast<std::int64_t>(std::floor(hi / kLambdaGridStep + 1e-9));
      for (std::int64_t k = 1; k <= steps; ++k) {
        lambdas.push_back(static_cast<double>(k) * kLambdaGridStep);
      }
    }
    const auto rss = lambda_grid_rss(xs, ttfts, lambdas, exec);
    const auto best = static_cast<std::size_t>(std::min_element(rss.begin(), rss.end()) - rss.begin());
    double best_lambda = lambdas[best];
    LineFit best_fit = fit_at_lambda(xs, ttfts, best_lambda);

    // Golden-section refinement inside the neighbouring grid cells.
    const double upper = std::max(0.0, hi);
    double lo_l = std::max(0.0, best_lambda - kLambdaGridStep);
    double hi_l = std::min(upper, best_lambda + kLambdaGridStep);
    if (hi_l > lo_l) {
      const double g = (std::sqrt(5.0) - 1.0) / 2.0;
      double c = hi_l - g * (hi_l - lo_l);
      double d = lo_l + g * (hi_l - lo_l);
      double fc = fit_at_lambda(xs, ttfts, c).rss;
      double fd = fit_at_lambda(xs, ttfts, d).rss;
      for (int it = 0; it < 80; ++it) {
        if (fc < fd) {
          hi_l = d;
          d = c;
          fd = fc;
          c = hi_l - g * (hi_l - lo_l);
          fc = fit_at_lambda(xs, ttfts, c).rss;
        } else {
          lo_l = c;
          c = d;
          fc = fd;
          d = lo_l + g * (hi_l - lo_l);
          fd = fit_at_lambda(xs, ttfts, d).rss;
        }
      }
      const double refined = 0.5 * (lo_l + hi_l);
      const LineFit rf = fit_at_lambda(xs, ttfts, refined);
      if (rf.rss < best_fit.rss) {
        best_lambda = refined;
        best_fit = rf;
      }
    }

    if (best_fit.a < 0.0) {
      double mean = 0.0;
      for (double t : ttfts) mean += t;
      best_fit.a = 0.0;
      best_fit.b = mean / static_cast<double>(ttfts.size());
      best_fit.r2 = 0.0;
      best_lambda = 0.0;
      m.degraded = true;
    }
    m.a1 = best_fit.a;
    m.b1 = best_fit.b;
    m.lambda = best_lambda;
    m.r2_ttft = best_fit.r2;
    m.ttft_fitted = true;
  }
  return m;
}

std::optional<double> estimate_ttft(const LatencyModel& m, double x_norm) {
  if (!(x_norm > m.lambda)) return std::nullopt;
  return m.a1 / (x_norm - m.lambda) + m.b1;
}

double estimate_tpot(const LatencyModel& m, double y_norm) {
  if (!(y_norm > 0.0)) throw ContractViolation("estimate_tpot needs y_norm > 0");
  return m.a2 / y_norm + m.b2;
}

const char* to_string(AdjustAction a) {
  switch (a) {
    case AdjustAction::kGated:
      return "gated";
    case AdjustAction::kBothFail:
      return "both-fail";
    case AdjustAction::kPass:
      return "pass";
    case AdjustAction::kIncreaseX:
      return "increase-x";
    case AdjustAction::kIncreaseY:
      return "increase-y";
  }
  return "unknown";
}

AdjustResult adjust_partition_detailed(std::uint64_t iter, const PartitionConfig& current,
                                       const SloConfig& slo, const ControllerConfig& cfg,
                                       const LatencyModel& model, const Observation& obs) {
  validate(cfg);
  AdjustResult out{current, AdjustAction::kGated, 0, false};
  if (iter % static_cast<std::uint64_t>(cfg.window_size) != 0) return out;

  const bool ttft_fail = obs.ttft_p && *obs.ttft_p > slo.ttft_slo;
  const bool tpot_fail = obs.tpot_p && *obs.tpot_p > slo.tpot_slo;
  if (ttft_fail && tpot_fail) {
    out.action = AdjustAction::kBothFail;
    return out;
  }
  if (!ttft_fail && !tpot_fail) {
    out.action = AdjustAction::kPass;
    return out;
  }

  double x = current.x;
  double y = current.y;
  const double step = cfg.step_size;
  if (ttft_fail) {
    out.action = AdjustAction::kIncreaseX;
    auto misses = [&] {
      const auto est = estimate_ttft(model, normalized_shares({x, y}).first);
      return !est || *est > slo.ttft_slo;
    };
    while (out.steps < cfg.max_step && misses()) {
      if (x + step <= 100.0) {
        x += step;
      } else if (y - step > 0.0) {
        y -= step;
      } else {
        out.blocked = true;
        break;
      }
      ++out.steps;
    }
  } else {
    out.action = AdjustAction::kIncreaseY;
    auto misses = [&] {
      return estimate_tpot(model, normalized_shares({x, y}).second) > slo.tpot_slo;
    };
    while (out.steps < cfg.max_step && misses()) {
      if (y + step <= 100.0) {
        y += step;
      } else if (x - step > 0.0) {
        x -= step;
      } else {
        out.blocked = true;
        break;
      }
      ++out.steps;
    }
  }
  out.next = {x, y};
  return out;
}

PartitionConfig adjust_partition(std::uint64_t iter, const PartitionConfig& current,
                                 const SloConfig& slo, const ControllerConfig& cfg,
                                 const LatencyModel& model, const Observation& obs) {
  return adjust_partition_detailed(iter, current, slo, cfg, model, obs).next;
}

PartitionController::PartitionController(SloConfig slo, ControllerConfig cfg,
                                         std::size_t history_limit)
    : slo_(slo), cfg_(cfg), history_limit_(std::max<std::size_t>(history_limit, 2)) {
  validate(slo_);
  validate(cfg_);
}

PartitionConfig PartitionController::on_window(const WindowInput& in) {
  const auto [xn, yn] = normalized_shares(in.current);
  Observation obs;
  obs.window = window_++;
  obs.x_norm = xn;
  obs.y_norm = yn;
  const auto lat = observe_window(in.ttfts, in.tpots, slo_.percentile);
  obs.ttft_p = lat.ttft;
  obs.tpot_p = lat.tpot;
  obs.ttft_samples = in.ttfts.size();
  obs.tpot_samples = in.tpots.size();

  history_.push_back(obs);
  if (history_.size() > history_limit_) history_.erase(history_.begin());

  // Sides without a usable fit fall back to the queueing model built from this
  // window's measured rate and per-work latency.
  LatencyModel fitted = fit_latency_model(history_, model_);
  const bool have_prior = in.window_seconds > 0.0 && in.prefill_l100_per_request > 0.0 &&
                          in.decode_l100_per_iteration > 0.0;
  if (have_prior) {
    const LatencyModel prior =
        analytic_model(static_cast<double>(in.arrivals) / in.window_seconds,
                       in.prefill_l100_per_request, in.decode_l100_per_iteration,
                       slo_.percentile);
    if (!fitted.ttft_fitted || fitted.a1 == 0.0) {
      fitted.a1 = prior.a1;
      fitted.b1 = prior.b1;
      fitted.lambda = prior.lambda;
    }
    if (!fitted.tpot_fitted || fitted.a2 == 0.0) {
      fitted.a2 = prior.a2;
      fitted.b2 = prior.b2;
    }
  }
  model_ = fitted;

  const AdjustResult r = adjust_partition_detailed(in.iter, in.current, slo_, cfg_, model_, obs);

  ControllerLogRow row;
  row.window = obs.window;
  row.x = in.current.x;
  row.y = in.current.y;
  row.x_norm = xn;
  row.y_norm = yn;
  row.ttft_p = obs.ttft_p;
  row.tpot_p = obs.tpot_p;
  row.est_ttft = estimate_ttft(model_, xn);
  row.est_tpot = estimate_tpot(model_, yn);
  row.action = to_string(r.action);
  if (!(r.next == in.current)) row.action += fmt::format(":{:g}/{:g}", r.next.x, r.next.y);
  log_.push_back(row);
  return r.next;
}

std::string controller_log_header() {
  return "window,x,y,x_norm,y_norm,ttft_p,tpot_p,est_ttft,est_tpot,action\n";
}

namespace {

std::string opt(const std::optional<double>& v) {
  return v ? fmt::format("{:.9f}", *v) : std::string();
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

std::string format_controller_row(const ControllerLogRow& r) {
  return fmt::format("{},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{},{:.9f},{}\n", r.window, r.x, r.y,
                     r.x_norm, r.y_norm, opt(r.ttft_p), opt(r.tpot_p), opt(r.est_ttft),
                     r.est_tpot, r.action);
}

std::vector<ControllerLogRow> parse_controller_log(const std::string& text) {
  std::vector<ControllerLogRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line + "\n" != controller_log_header()) {
        throw ConfigError("controller_log", "line 1: unexpected header");
      }
      continue;
    }
    std::vector<std::string> f;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 10) {
      throw ConfigError("controller_log", fmt::format("line {}: expected 10 fields", lineno));
    }
    try {
      ControllerLogRow r;
      r.window = std::stoull(f[0]);
      r.x = std::stod(f[1]);
      r.y = std::stod(f[2]);
      r.x_norm = std::stod(f[3]);
      r.y_norm = std::stod(f[4]);
      r.ttft_p = parse_opt(f[5]);
      r.tpot_p = parse_opt(f[6]);
      r.est_ttft = parse_opt(f[7]);
      r.est_tpot = std::stod(f[8]);
      r.action = f[9];
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw ConfigError("controller_log", fmt::format("line {}: malformed number", lineno));
    }
  }
  return rows;
}

}  // namespace simpd
