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

#include "simpd/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "simpd/controller.hpp"
#include "simpd/error.hpp"

namespace simpd {

namespace {

double round_ns(double v) { return std::round(v * 1e9) / 1e9; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream row(line);
  while (std::getline(row, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename F>
void for_each_row(const std::string& text, const std::string& header, const char* what, F&& f) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line + "\n" != header) {
        throw ConfigError(what, fmt::format("line {}: unexpected header", lineno));
      }
      header_seen = true;
      continue;
    }
    try {
      f(split_csv(line), lineno);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError(what, fmt::format("line {}: malformed row", lineno));
    }
  }
}

std::string fmt_or_nan(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.9f}", v); }

double parse_or_nan(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

RequestMetrics per_request_metrics(const RequestRecord& rec) {
  if (std::isnan(rec.prefill_done) || std::isnan(rec.completed)) {
    throw ContractViolation("request " + std::to_string(rec.request.id) + " has not completed");
  }
  RequestMetrics m;
  m.id = rec.request.id;
  m.arrival = rec.request.arrival;
  m.input_tokens = rec.request.input_len;
  m.output_tokens = rec.request.output_len;
  m.ttft = round_ns(rec.prefill_done - rec.request.arrival);
  if (rec.request.output_len >= 2) {
    m.tpot = round_ns((rec.completed - rec.prefill_done) /
                      static_cast<double>(rec.request.output_len - 1));
  }
  m.e2e = round_ns(rec.completed - rec.request.arrival);
  m.preemptions = rec.preemptions;
  return m;
}

std::vector<RequestMetrics> per_request_metrics(std::span<const RequestRecord> recs) {
  std::vector<RequestMetrics> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(per_request_metrics(r));
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ContractViolation("percentile of an empty list");
  if (!(p > 0.0 && p <= 1.0)) throw ContractViolation("percentile p must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double slo_attainment(std::span<const RequestMetrics> rows, const SloConfig& slo) {
  if (rows.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& r : rows) {
    if (r.ttft <= slo.ttft_slo && (!r.tpot || *r.tpot <= slo.tpot_slo)) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(rows.size());
}

Summary summarize(std::span<const RequestMetrics> rows, const std::string& engine, double rate,
                  const SloConfig& slo, double trim) {
  if (!(trim >= 0.0 && trim < 0.5)) throw ConfigError("metrics.trim", "must lie in [0, 0.5)");
  std::vector<RequestMetrics> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const RequestMetrics& a, const RequestMetrics& b) { return a.id < b.id; });
  const auto cut = static_cast<std::size_t>(std::floor(trim * static_cast<double>(sorted.size())));
  std::span<const RequestMetrics> kept(sorted);
  if (sorted.size() > 2 * cut) kept = kept.subspan(cut, sorted.size() - 2 * cut);

  Summary s;
  s.engine = engine;
  s.rate = rate;
  if (kept.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.p50_ttft = s.p90_ttft = s.p99_ttft = nan;
    s.p50_tpot = s.p90_tpot = s.p99_tpot = nan;
    s.mean_e2e = nan;
    return s;
  }
  std::vector<double> ttft, tpot;
  double e2e = 0.0;
  for (const auto& r : kept) {
    ttft.push_back(r.ttft);
    if (r.tpot) tpot.push_back(*r.tpot);
    e2e += r.e2e;
  }
  s.p50_ttft = percentile(ttft, 0.5);
  s.p90_ttft = percentile(ttft, 0.9);
  s.p99_ttft = percentile(ttft, 0.99);
  if (tpot.empty()) {
    s.p50_tpot = s.p90_tpot = s.p99_tpot = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.p50_tpot = percentile(tpot, 0.5);
    s.p90_tpot = percentile(tpot, 0.9);
    s.p99_tpot = percentile(tpot, 0.99);
  }
  s.attainment = slo_attainment(kept, slo);
  s.mean_e2e = e2e / static_cast<double>(kept.size());
  return s;
}

GoodputResult max_goodput(std::span<const double> rates, std::span<const double> attainments,
                          double threshold) {
  if (rates.size() != attainments.size()) throw ContractViolation("rates/attainments size mismatch");
  GoodputResult g;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (i > 0 && !(rates[i] > rates[i - 1])) throw ContractViolation("rates must be ascending");
    if (i > 0 && attainments[i] > attainments[i - 1]) g.monotone = false;
    if (attainments[i] >= threshold) g.rate = rates[i];
  }
  return g;
}

std::string requests_csv_header() {
  return "id,arrival_s,input_tokens,output_tokens,ttft_s,tpot_s,e2e_s,preemptions\n";
}

std::string format_requests_csv(std::span<const RequestMetrics> rows) {
  std::string out = requests_csv_header();
  for (const auto& r : rows) {
    out += fmt::format("{},{:.9f},{},{},{:.9f},{},{:.9f},{}\n", r.id, r.arrival, r.input_tokens,
                       r.output_tokens, r.ttft, r.tpot ? fmt::format("{:.9f}", *r.tpot) : "",
                       r.e2e, r.preemptions);
  }
  return out;
}

std::vector<RequestMetrics> parse_requests_csv(const std::string& text) {
  std::vector<RequestMetrics> out;
  for_each_row(text, requests_csv_header(), "requests_csv",
               [&](const std::vector<std::string>& f, std::size_t lineno) {
                 if (f.size() != 8) {
                   throw ConfigError("requests_csv", fmt::format("line {}: expected 8 fields", lineno));
                 }
                 RequestMetrics r;
                 r.id = std::stoull(f[0]);
                 r.arrival = std::stod(f[1]);
                 r.input_tokens = std::stoll(f[2]);
                 r.output_tokens = std::stoll(f[3]);
                 r.ttft = std::stod(f[4]);
                 if (!f[5].empty()) r.tpot = std::stod(f[5]);
                 r.e2e = std::stod(f[6]);
                 r.preemptions = std::stoll(f[7]);
                 out.push_back(r);
               });
  return out;
}

std::string summary_csv_header() {
  return "engine,rate,p50_ttft,p90_ttft,p99_ttft,p50_tpot,p90_tpot,p99_tpot,attainment,mean_e2e\n";
}

std::string format_summary_row(const Summary& s) {
  return fmt::format("{},{:.6f},{},{},{},{},{},{},{:.6f},{}\n", s.engine, s.rate,
                     fmt_or_nan(s.p50_ttft), fmt_or_nan(s.p90_ttft), fmt_or_nan(s.p99_ttft),
                     fmt_or_nan(s.p50_tpot), fmt_or_nan(s.p90_tpot), fmt_or_nan(s.p99_tpot),
                     s.attainment, fmt_or_nan(s.mean_e2e));
}

std::vector<Summary> parse_summary_csv(const std::string& text) {
  std::vector<Summary> out;
  for_each_row(text, summary_csv_header(), "summary_csv",
               [&](const std::vector<std::string>& f, std::size_t lineno) {
                 if (f.size() != 10) {
                   throw ConfigError("summary_csv", fmt::format("line {}: expected 10 fields", lineno));
                 }
                 Summary s;
                 s.engine = f[0];
                 s.rate = std::stod(f[1]);
                 s.p50_ttft = parse_or_nan(f[2]);
                 s.p90_ttft = parse_or_nan(f[3]);
                 s.p99_ttft = parse_or_nan(f[4]);
                 s.p50_tpot = parse_or_nan(f[5]);
                 s.p90_tpot = parse_or_nan(f[6]);
                 s.p99_tpot = parse_or_nan(f[7]);
                 s.attainment = std::stod(f[8]);
                 s.mean_e2e = parse_or_nan(f[9]);
                 out.push_back(s);
               });
  return out;
}

}  // namespace simpd
