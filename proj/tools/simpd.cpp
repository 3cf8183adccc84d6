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

// simpd: command-line driver for scenario runs, rate sweeps and comparisons.
//
// Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime failure.

#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "simpd/controller.hpp"
#include "simpd/error.hpp"
#include "simpd/scenario.hpp"

namespace fs = std::filesystem;
using namespace simpd;

namespace {

// "4,8,12" or "start:stop:step" (inclusive).
std::vector<double> parse_rates(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(text);
    if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || b < a) {
      throw ConfigError("--rates", "expected start:stop:step with step > 0");
    }
    const auto n = static_cast<std::int64_t>(std::floor((b - a) / step + 1e-9));
    for (std::int64_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    return out;
  }
  std::istringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ConfigError("--rates", "not a number: '" + cell + "'");
    }
  }
  if (out.empty()) throw ConfigError("--rates", "empty rate list");
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("input", "cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw SimulationError("cannot write '" + p.string() + "'");
  f << text;
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string out;
};

ScenarioConfig load_with_overrides(const std::string& path, const Common& common) {
  ScenarioConfig c = load_scenario(path);
  if (common.seed) {
    c.seed = *common.seed;
    if (c.workload) c.workload->seed = c.seed;
  }
  if (!common.out.empty()) c.output_dir = common.out;
  return c;
}

void print_goodput(const SweepResult& s, double threshold) {
  fmt::print("max goodput at attainment >= {}: {} req/s{}\n", threshold, s.goodput.rate,
             s.goodput.monotone ? "" : " (attainment not monotone in rate)");
}

int cmd_run(const std::string& config, const Common& common, std::optional<double> rate) {
  const ScenarioConfig c = load_with_overrides(config, common);
  const RunOutput out = run_scenario(c, rate);
  write_run(c, out, c.output_dir);
  const auto& s = out.summary;
  fmt::print("{} rate={} requests={} p90_ttft={:.4f}s p90_tpot={:.4f}s attainment={:.4f}\n",
             s.engine, s.rate, out.rows.size(), s.p90_ttft, s.p90_tpot, s.attainment);
  fmt::print("wrote {}\n", c.output_dir.string());
  return 0;
}

int cmd_sweep(const std::string& config, const Common& common, const std::string& rates_text,
              std::optional<double> threshold, bool serial) {
  const ScenarioConfig c = load_with_overrides(config, common);
  const std::vector<double> rates = rates_text.empty() ? c.sweep_rates : parse_rates(rates_text);
  if (rates.empty()) throw ConfigError("sweep.rates", "no rates given on the command line or in the config");
  const double th = threshold.value_or(c.threshold);
  const SweepResult s = sweep(c, rates, th, serial ? Execution::kSerial : Execution::kParallel);
  fs::create_directories(c.output_dir);
  write_file(c.output_dir / "summary.csv", format_summary_csv(s.rows));
  write_file(c.output_dir / "config.resolved.toml", to_toml(c));
  std::fputs(format_summary_csv(s.rows).c_str(), stdout);
  print_goodput(s, th);
  return 0;
}

int cmd_compare(const std::vector<std::string>& inputs, const Common& common,
                const std::string& rates_text, std::optional<double> threshold, bool serial) {
  if (inputs.empty()) throw ConfigError("compare", "at least one input is required");
  std::vector<std::vector<Summary>> tables;
  for (const auto& in : inputs) {
    if (fs::path(in).extension() == ".csv") {
      tables.push_back(parse_summary_csv(read_file(in)));
      continue;
    }
    Common per = common;
    per.out.clear();
    const ScenarioConfig c = load_with_overrides(in, per);
    std::vector<double> rates = rates_text.empty() ? c.sweep_rates : parse_rates(rates_text);
    if (rates.empty()) rates = {c.workload ? c.workload->rate : 0.0};
    if (c.trace_file) {
      tables.push_back({run_scenario(c).summary});
    } else {
      const double th = threshold.value_or(c.threshold);
      const SweepResult s = sweep(c, rates, th, serial ? Execution::kSerial : Execution::kParallel);
      fmt::print("{}: ", engine_label(c));
      print_goodput(s, th);
      tables.push_back(s.rows);
    }
  }
  const std::vector<Summary> merged = merge_summaries(tables);
  const fs::path dir = common.out.empty() ? fs::path("out/compare") : fs::path(common.out);
  fs::create_directories(dir);
  write_file(dir / "summary.csv", format_summary_csv(merged));
  for (const auto& m : summary_metrics()) write_file(dir / (m + ".csv"), long_format(merged, m));
  fmt::print("merged {} rows into {}\n", merged.size(), dir.string());
  return 0;
}

int cmd_fit(const std::string& log_path) {
  const auto rows = parse_controller_log(read_file(log_path));
  std::vector<Observation> history;
  for (const auto& r : rows) {
    Observation o;
    o.window = r.window;
    o.x_norm = r.x_norm;
    o.y_norm = r.y_norm;
    o.ttft_p = r.ttft_p;
    o.tpot_p = r.tpot_p;
    o.ttft_samples = r.ttft_p ? 1 : 0;
    o.tpot_samples = r.tpot_p ? 1 : 0;
    history.push_back(o);
  }
  const LatencyModel m = fit_latency_model(history, LatencyModel{});
  fmt::print("windows {}\n", history.size());
  fmt::print("ttft = {:.6g} / (x' - {:.4g}) + {:.6g}   r2={:.4f} fitted={}\n", m.a1, m.lambda, m.b1,
             m.r2_ttft, m.ttft_fitted);
  fmt::print("tpot = {:.6g} / y' + {:.6g}   r2={:.4f} fitted={}\n", m.a2, m.b2, m.r2_tpot,
             m.tpot_fitted);
  if (m.degraded) fmt::print("warning: a negative slope was clamped to zero\n");
  return 0;
}

int cmd_trace_gen(const std::string& config, const std::string& preset_name, const Common& common,
                  std::optional<double> rate, std::optional<std::int64_t> count) {
  TraceParams p;
  if (!config.empty()) {
    const ScenarioConfig c = load_with_overrides(config, Common{common.seed, {}});
    if (!c.workload) throw ConfigError("workload.trace", "config already names a trace file");
    p = *c.workload;
  } else {
    p = preset(preset_name);
    if (common.seed) p.seed = *common.seed;
  }
  if (rate) p.rate = *rate;
  if (count) p.count = *count;
  const Trace t = generate_trace(p);
  const fs::path out = common.out.empty() ? fs::path("trace.csv") : fs::path(common.out);
  write_file(out, format_trace(t));
  fmt::print("wrote {} requests to {}\n", t.size(), out.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for unified, disaggregated and semi-PD LLM serving"};
  app.require_subcommand(1);
  Common common;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string rates;
  std::optional<double> threshold;
  std::optional<double> rate;
  std::optional<std::int64_t> count;
  bool serial = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_option("--out", out, "Output directory (file for trace gen)");
  };

  std::string config;
  auto* run = app.add_subcommand("run", "Run one scenario and write its reports");
  run->add_option("config", config, "Scenario TOML file")->required();
  run->add_option("--rate", rate, "Override the workload arrival rate");
  add_common(run);

  auto* sw = app.add_subcommand("sweep", "Run a scenario over several arrival rates");
  sw->add_option("config", config, "Scenario TOML file")->required();
  sw->add_option("--rates", rates, "Comma list or start:stop:step");
  sw->add_option("--threshold", threshold, "Attainment threshold for goodput");
  sw->add_flag("--serial", serial, "Run rates one after another");
  add_common(sw);

  std::vector<std::string> inputs;
  auto* cmp = app.add_subcommand("compare", "Merge several scenarios into one summary table");
  cmp->add_option("inputs", inputs, "Scenario TOML files or summary CSV files");
  cmp->add_option("--rates", rates, "Comma list or start:stop:step");
  cmp->add_option("--threshold", threshold, "Attainment threshold for goodput");
  cmp->add_flag("--serial", serial, "Run rates one after another");
  add_common(cmp);

  std::string log_path;
  auto* fit = app.add_subcommand("fit", "Fit the latency model from a controller log");
  fit->add_option("log", log_path, "controller.csv")->required();

  auto* trace = app.add_subcommand("trace", "Trace utilities");
  trace->require_subcommand(1);
  std::string preset_name = "sharegpt-like";
  auto* gen = trace->add_subcommand("gen", "Write a generated trace CSV");
  gen->add_option("config", config, "Scenario TOML file (its workload section is used)");
  gen->add_option("--preset", preset_name, "Length preset when no config is given");
  gen->add_option("--rate", rate, "Arrival rate");
  gen->add_option("--count", count, "Number of requests");
  add_common(gen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  common.seed = seed;
  common.out = out;

  try {
    if (run->parsed()) return cmd_run(config, common, rate);
    if (sw->parsed()) return cmd_sweep(config, common, rates, threshold, serial);
    if (cmp->parsed()) return cmd_compare(inputs, common, rates, threshold, serial);
    if (fit->parsed()) return cmd_fit(log_path);
    if (gen->parsed()) return cmd_trace_gen(config, preset_name, common, rate, count);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  } catch (const ContractViolation& e) {
    fmt::print(stderr, "internal error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 1;
}
