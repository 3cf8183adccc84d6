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

#include "simpd/workload.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "simpd/error.hpp"

namespace simpd {

namespace {

// Transforms are written out by hand so that traces do not depend on the
// standard library's distribution implementations; only mt19937_64 is
// pinned by the standard.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : gen_(seed) {}

  // Uniform in (0, 1).
  double unit() {
    for (;;) {
      const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double exponential(double rate) { return -std::log(unit()) / rate; }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = unit();
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  std::optional<double> spare_;
};

std::int64_t clamp_len(double v, std::int64_t max_len) {
  const double r = std::round(v);
  if (!(r >= 1.0)) return 1;
  if (r >= static_cast<double>(max_len)) return max_len;
  return static_cast<std::int64_t>(r);
}

std::int64_t draw(const LengthDist& d, Sampler& s, std::int64_t max_len) {
  return std::visit(
      [&](const auto& x) -> std::int64_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, dist::Constant>) {
          return clamp_len(x.value, max_len);
        } else if constexpr (std::is_same_v<T, dist::Uniform>) {
          return clamp_len(x.lo + (x.hi - x.lo) * s.unit(), max_len);
        } else if constexpr (std::is_same_v<T, dist::Lognormal>) {
          return clamp_len(std::exp(x.mu + x.sigma * s.normal()), max_len);
        } else {
          double total = 0.0;
          for (const auto& [v, w] : x.bins) total += w;
          double u = s.unit() * total;
          for (const auto& [v, w] : x.bins) {
            if (u < w) return clamp_len(v, max_len);
            u -= w;
          }
          return clamp_len(x.bins.back().first, max_len);
        }
      },
      d);
}

void validate_dist(const LengthDist& d, const std::string& field) {
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, dist::Constant>) {
          if (!(x.value >= 1.0)) throw ConfigError(field, "constant value must be >= 1");
        } else if constexpr (std::is_same_v<T, dist::Uniform>) {
          if (!(x.lo >= 1.0)) throw ConfigError(field, "uniform lo must be >= 1");
          if (!(x.hi >= x.lo)) {
            throw ConfigError(field, fmt::format("uniform hi ({}) < lo ({})", x.hi, x.lo));
          }
        } else if constexpr (std::is_same_v<T, dist::Lognormal>) {
          if (!std::isfinite(x.mu)) throw ConfigError(field, "lognormal mu must be finite");
          if (!(x.sigma >= 0.0) || !std::isfinite(x.sigma)) {
            throw ConfigError(field, "lognormal sigma must be finite and >= 0");
          }
        } else {
          if (x.bins.empty()) throw ConfigError(field, "empirical histogram has no bins");
          double total = 0.0;
          for (const auto& [v, w] : x.bins) {
            if (!(v >= 1.0)) throw ConfigError(field, "empirical bin value must be >= 1");
            if (!(w >= 0.0)) throw ConfigError(field, "empirical bin weight must be >= 0");
            total += w;
          }
          if (!(total > 0.0)) throw ConfigError(field, "empirical weights sum to zero");
        }
      },
      d);
}

}  // namespace

dist::Lognormal lognormal_with_mean(double mean, double sigma) {
  return dist::Lognormal{std::log(mean) - 0.5 * sigma * sigma, sigma};
}

void validate(const TraceParams& p) {
  if (!(p.rate > 0.0) || !std::isfinite(p.rate)) {
    throw ConfigError("workload.rate", "must be a finite value > 0");
  }
  if (p.count <= 0) throw ConfigError("workload.count", "must be > 0");
  if (p.max_len < 1) throw ConfigError("workload.max_len", "must be >= 1");
  validate_dist(p.input, "workload.input");
  validate_dist(p.output, "workload.output");
  if (!p.mixture.empty()) {
    double total = 0.0;
    for (std::size_t i = 0; i < p.mixture.size(); ++i) {
      const auto& c = p.mixture[i];
      const std::string field = fmt::format("workload.mixture[{}]", i);
      if (!(c.weight >= 0.0)) throw ConfigError(field + ".weight", "must be >= 0");
      if (c.input) validate_dist(*c.input, field + ".input");
      if (c.output) validate_dist(*c.output, field + ".output");
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("workload.mixture",
                        fmt::format("weights sum to {:.12g}, expected 1", total));
    }
  }
}

Trace generate_trace(const TraceParams& p) {
  validate(p);
  Sampler s(p.seed);
  Trace out;
  out.reserve(static_cast<std::size_t>(p.count));
  double t = 0.0;
  for (std::int64_t i = 0; i < p.count; ++i) {
    t += s.exponential(p.rate);
    const LengthDist* in = &p.input;
    const LengthDist* outd = &p.output;
    if (!p.mixture.empty()) {
      double u = s.unit();
      std::size_t k = 0;
      for (; k + 1 < p.mixture.size(); ++k) {
        if (u < p.mixture[k].weight) break;
        u -= p.mixture[k].weight;
      }
      if (p.mixture[k].input) in = &*p.mixture[k].input;
      if (p.mixture[k].output) outd = &*p.mixture[k].output;
    }
    Request r;
    r.id = static_cast<std::uint64_t>(i);
    r.arrival = std::round(t * 1e9) / 1e9;
    r.input_len = draw(*in, s, p.max_len);
    r.output_len = draw(*outd, s, p.max_len);
    out.push_back(r);
  }
  return out;
}

TraceParams preset(const std::string& name) {
  TraceParams p;
  if (name == "sharegpt-like") {
    p.input = lognormal_with_mean(251.0, 1.0);
    p.output = lognormal_with_mean(200.0, 0.8);
  } else if (name == "longbench-like") {
    p.input = lognormal_with_mean(3000.0, 0.5);
    p.output = lognormal_with_mean(200.0, 0.8);
  } else if (name == "heterogeneous") {
    p.input = lognormal_with_mean(251.0, 1.0);
    p.output = lognormal_with_mean(200.0, 0.8);
    p.mixture = {MixtureComponent{0.95, std::nullopt, std::nullopt},
                 MixtureComponent{0.05, LengthDist{lognormal_with_mean(4096.0, 0.25)},
                                  std::nullopt}};
  } else {
    throw ConfigError("workload.preset", "unknown preset '" + name + "'");
  }
  return p;
}

std::vector<std::string> preset_names() {
  return {"sharegpt-like", "longbench-like", "heterogeneous"};
}

LoadedTrace parse_trace(const std::string& text) {
  LoadedTrace out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "arrival_s,input_tokens,output_tokens") {
        throw ConfigError("trace", fmt::format("line {}: expected header "
                                               "'arrival_s,input_tokens,output_tokens'",
                                               lineno));
      }
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    std::string a, b, c, extra;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') ||
        !std::getline(row, c, ',') || std::getline(row, extra, ',')) {
      throw ConfigError("trace", fmt::format("line {}: expected 3 fields", lineno));
    }
    Request r;
    try {
      std::size_t pa = 0, pb = 0, pc = 0;
      r.arrival = std::stod(a, &pa);
      r.input_len = std::stoll(b, &pb);
      r.output_len = std::stoll(c, &pc);
      if (pa != a.size() || pb != b.size() || pc != c.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("trace", fmt::format("line {}: malformed number", lineno));
    }
    if (!(r.arrival >= 0.0) || !std::isfinite(r.arrival)) {
      throw ConfigError("trace", fmt::format("line {}: arrival_s must be >= 0", lineno));
    }
    if (r.input_len < 1) {
      throw ConfigError("trace", fmt::format("line {}: input_tokens must be >= 1", lineno));
    }
    if (r.output_len < 1) {
      throw ConfigError("trace", fmt::format("line {}: output_tokens must be >= 1", lineno));
    }
    out.requests.push_back(r);
  }
  if (!std::is_sorted(out.requests.begin(), out.requests.end(),
                      [](const Request& x, const Request& y) { return x.arrival < y.arrival; })) {
    std::stable_sort(out.requests.begin(), out.requests.end(),
                     [](const Request& x, const Request& y) { return x.arrival < y.arrival; });
    out.resorted = true;
  }
  for (std::size_t i = 0; i < out.requests.size(); ++i) out.requests[i].id = i;
  return out;
}

LoadedTrace load_trace(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("trace", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_trace(ss.str());
}

std::string format_trace(const Trace& trace) {
  std::string out = "arrival_s,input_tokens,output_tokens\n";
  for (const auto& r : trace) {
    out += fmt::format("{:.9f},{},{}\n", r.arrival, r.input_len, r.output_len);
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw SimulationError("cannot write '" + path.string() + "'");
  f << format_trace(trace);
}

}  // namespace simpd
