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

#include "simpd/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "simpd/error.hpp"

namespace simpd {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Typed access to one TOML table; every key read is remembered so that
// finish() can reject typos.
class Reader {
 public:
  Reader(const toml::table& t, std::string path) : t_(t), path_(std::move(path)) {}

  bool has(const std::string& key) const { return t_.contains(key); }
  const std::string& path() const { return path_; }
  std::string field(const std::string& key) const { return join(path_, key); }

  std::optional<double> number(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<double>()) return *v;
    if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
    throw ConfigError(field(key), "expected a number");
  }
  double number(const std::string& key, double fallback) { return number(key).value_or(fallback); }

  std::optional<std::int64_t> integer(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    throw ConfigError(field(key), "expected an integer");
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return integer(key).value_or(fallback);
  }

  std::optional<bool> boolean(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<bool>()) return *v;
    throw ConfigError(field(key), "expected true or false");
  }

  std::optional<std::string> string(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::string>()) return *v;
    throw ConfigError(field(key), "expected a string");
  }

  std::optional<Reader> table(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (const auto* t = n->as_table()) return Reader(*t, field(key));
    throw ConfigError(field(key), "expected a table");
  }

  const toml::array* array(const std::string& key) {
    const toml::node* n = node(key);
    if (!n) return nullptr;
    if (const auto* a = n->as_array()) return a;
    throw ConfigError(field(key), "expected an array");
  }

  void finish() const {
    for (const auto& [k, v] : t_) {
      const std::string key(k.str());
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  const toml::node* node(const std::string& key) {
    seen_.insert(key);
    return t_.get(key);
  }

  const toml::table& t_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const toml::node& n, const std::string& field) {
  if (auto v = n.value_exact<double>()) return *v;
  if (auto v = n.value_exact<std::int64_t>()) return static_cast<double>(*v);
  throw ConfigError(field, "expected a number");
}

LengthDist read_dist(Reader r) {
  const auto kind = r.string("kind");
  if (!kind) throw ConfigError(r.field("kind"), "missing distribution kind");
  LengthDist d;
  if (*kind == "constant") {
    const auto v = r.number("value");
    if (!v) throw ConfigError(r.field("value"), "missing");
    d = dist::Constant{*v};
  } else if (*kind == "uniform") {
    const auto lo = r.number("lo");
    const auto hi = r.number("hi");
    if (!lo) throw ConfigError(r.field("lo"), "missing");
    if (!hi) throw ConfigError(r.field("hi"), "missing");
    d = dist::Uniform{*lo, *hi};
  } else if (*kind == "lognormal") {
    const double sigma = r.number("sigma", 1.0);
    const auto mean = r.number("mean");
    const auto mu = r.number("mu");
    if (mean && mu) throw ConfigError(r.field("mu"), "give either mean or mu, not both");
    if (mean) {
      if (!(*mean > 0.0)) throw ConfigError(r.field("mean"), "must be > 0");
      d = lognormal_with_mean(*mean, sigma);
    } else if (mu) {
      d = dist::Lognormal{*mu, sigma};
    } else {
      throw ConfigError(r.field("mean"), "lognormal needs mean or mu");
    }
  } else if (*kind == "empirical") {
    const toml::array* bins = r.array("bins");
    if (!bins) throw ConfigError(r.field("bins"), "missing");
    dist::Empirical e;
    for (std::size_t i = 0; i < bins->size(); ++i) {
      const std::string f = fmt::format("{}[{}]", r.field("bins"), i);
      const auto* pair = (*bins)[i].as_array();
      if (!pair || pair->size() != 2) throw ConfigError(f, "expected [value, weight]");
      e.bins.emplace_back(as_number((*pair)[0], f), as_number((*pair)[1], f));
    }
    d = std::move(e);
  } else {
    throw ConfigError(r.field("kind"), "unknown distribution '" + *kind + "'");
  }
  r.finish();
  return d;
}

TraceParams read_workload(Reader& w) {
  TraceParams p;
  if (auto name = w.string("preset")) p = preset(*name);
  if (auto v = w.number("rate")) p.rate = *v;
  if (auto v = w.integer("count")) p.count = *v;
  if (auto v = w.integer("max_len")) p.max_len = *v;
  if (auto t = w.table("input")) p.input = read_dist(*t);
  if (auto t = w.table("output")) p.output = read_dist(*t);
  if (const toml::array* mix = w.array("mixture")) {
    p.mixture.clear();
    for (std::size_t i = 0; i < mix->size(); ++i) {
      const std::string f = fmt::format("{}[{}]", w.field("mixture"), i);
      const auto* t = (*mix)[i].as_table();
      if (!t) throw ConfigError(f, "expected a table");
      Reader m(*t, f);
      MixtureComponent c;
      const auto weight = m.number("weight");
      if (!weight) throw ConfigError(m.field("weight"), "missing");
      c.weight = *weight;
      if (auto d = m.table("input")) c.input = read_dist(*d);
      if (auto d = m.table("output")) c.output = read_dist(*d);
      m.finish();
      p.mixture.push_back(std::move(c));
    }
  }
  return p;
}

PartitionConfig read_partition(Reader& r, const std::string& key, PartitionConfig fallback) {
  const toml::array* a = r.array(key);
  if (!a) return fallback;
  if (a->size() != 2) throw ConfigError(r.field(key), "expected [x, y]");
  return {as_number((*a)[0], r.field(key)), as_number((*a)[1], r.field(key))};
}

void read_engine(Reader& e, ScenarioConfig& c) {
  auto& eng = c.setup.engine;
  if (auto k = e.string("kind")) {
    const auto kind = parse_engine_kind(*k);
    if (!kind) throw ConfigError(e.field("kind"), "unknown engine '" + *k + "'");
    eng.kind = *kind;
  }
  if (auto v = e.string("label")) c.label = *v;
  if (auto v = e.integer("max_batch_size")) eng.max_batch_size = *v;
  if (auto v = e.integer("chunk_size")) eng.chunk_size = *v;
  if (auto v = e.string("transfer")) {
    if (*v == "one-decode-iteration") {
      eng.transfer.kind = TransferMode::Kind::kOneDecodeIteration;
    } else if (*v == "bandwidth") {
      eng.transfer.kind = TransferMode::Kind::kBandwidth;
    } else {
      throw ConfigError(e.field("transfer"), "expected one-decode-iteration or bandwidth");
    }
  }
  if (auto v = e.number("transfer_bandwidth")) eng.transfer.bytes_per_second = *v;
  if (auto v = e.number("switch_prep_delay")) eng.switch_prep_delay = *v;
  if (auto v = e.boolean("naive_switch")) eng.naive_switch = *v;
  eng.initial_partition = read_partition(e, "initial_partition", eng.initial_partition);
  if (auto v = e.boolean("dynamic")) eng.dynamic = *v;
  if (auto v = e.boolean("preemption")) eng.preemption = *v;
  if (auto v = e.integer("instances")) eng.instances = *v;
  if (const toml::array* sched = e.array("switch_schedule")) {
    for (std::size_t i = 0; i < sched->size(); ++i) {
      const std::string f = fmt::format("{}[{}]", e.field("switch_schedule"), i);
      const auto* t = (*sched)[i].as_table();
      if (!t) throw ConfigError(f, "expected a table");
      Reader s(*t, f);
      ScheduledSwitch sw;
      const auto time = s.number("time");
      const auto x = s.number("x");
      const auto y = s.number("y");
      if (!time) throw ConfigError(s.field("time"), "missing");
      if (!x) throw ConfigError(s.field("x"), "missing");
      if (!y) throw ConfigError(s.field("y"), "missing");
      sw.time = *time;
      sw.partition = {*x, *y};
      s.finish();
      eng.switch_schedule.push_back(sw);
    }
  }
}

void read_cost(Reader& r, CostParams& c) {
  c.l100_prefill_base = r.number("l100_prefill_base", c.l100_prefill_base);
  c.prefill_per_token = r.number("prefill_per_token", c.prefill_per_token);
  c.prefill_attn_quad = r.number("prefill_attn_quad", c.prefill_attn_quad);
  c.decode_base = r.number("decode_base", c.decode_base);
  c.decode_per_seq = r.number("decode_per_seq", c.decode_per_seq);
  c.decode_per_kv_token = r.number("decode_per_kv_token", c.decode_per_kv_token);
  c.kv_bytes_per_token = r.number("kv_bytes_per_token", c.kv_bytes_per_token);
  c.gpu_count = r.integer("gpu_count", c.gpu_count);
}

void read_parallelism(Reader& r, ParallelismConfig& p) {
  p.tp_prefill = r.integer("tp_prefill", p.tp_prefill);
  p.tp_decode = r.integer("tp_decode", p.tp_decode);
  p.pp_prefill = r.integer("pp_prefill", p.pp_prefill);
  p.pp_decode = r.integer("pp_decode", p.pp_decode);
  p.tp_efficiency = r.number("tp_efficiency", p.tp_efficiency);
}

void read_kv(Reader& r, KvConfig& k) {
  k.block_size = r.integer("block_size", k.block_size);
  if (auto v = r.integer("capacity_blocks")) k.capacity_blocks = *v;
  if (auto v = r.integer("prefill_capacity_blocks")) k.prefill_capacity_blocks = *v;
  if (auto v = r.integer("decode_capacity_blocks")) k.decode_capacity_blocks = *v;
  if (auto v = r.number("gpu_mem_gb")) k.gpu_mem_bytes = *v * 1e9;
  if (auto v = r.number("weight_gb")) k.weight_bytes = *v * 1e9;
}

std::string num(double v) { return fmt::format("{}", v); }

std::string dist_toml(const LengthDist& d) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, dist::Constant>) {
          return fmt::format("{{ kind = \"constant\", value = {} }}", num(v.value));
        } else if constexpr (std::is_same_v<T, dist::Uniform>) {
          return fmt::format("{{ kind = \"uniform\", lo = {}, hi = {} }}", num(v.lo), num(v.hi));
        } else if constexpr (std::is_same_v<T, dist::Lognormal>) {
          return fmt::format("{{ kind = \"lognormal\", mu = {}, sigma = {} }}", num(v.mu),
                             num(v.sigma));
        } else {
          std::string bins;
          for (const auto& [value, weight] : v.bins) {
            if (!bins.empty()) bins += ", ";
            bins += fmt::format("[{}, {}]", num(value), num(weight));
          }
          return fmt::format("{{ kind = \"empirical\", bins = [{}] }}", bins);
        }
      },
      d);
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (const char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw SimulationError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw SimulationError("write failed for '" + path.string() + "'");
}

}  // namespace

void validate(const ScenarioConfig& c) {
  if (c.workload.has_value() == c.trace_file.has_value()) {
    throw ConfigError("workload", "exactly one of generated parameters and workload.trace is required");
  }
  if (c.workload) validate(*c.workload);
  validate(c.setup);
  if (!(c.trim >= 0.0 && c.trim < 0.5)) throw ConfigError("metrics.trim", "must lie in [0, 0.5)");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) {
    throw ConfigError("sweep.threshold", "must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < c.sweep_rates.size(); ++i) {
    if (!(c.sweep_rates[i] > 0.0)) throw ConfigError("sweep.rates", "rates must be > 0");
    if (i > 0 && !(c.sweep_rates[i] > c.sweep_rates[i - 1])) {
      throw ConfigError("sweep.rates", "rates must be strictly ascending");
    }
  }
}

ScenarioConfig parse_scenario(const std::string& toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    const auto& at = e.source().begin;
    throw ConfigError("toml", fmt::format("line {}, column {}: {}", at.line, at.column,
                                          std::string(e.description())));
  }
  Reader top(root, "");
  ScenarioConfig c;
  if (auto v = top.string("name")) c.name = *v;
  if (auto v = top.integer("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = top.string("output_dir")) c.output_dir = *v;

  auto w = top.table("workload");
  if (!w) throw ConfigError("workload", "missing section");
  if (auto trace = w->string("trace")) {
    std::filesystem::path p(*trace);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.trace_file = p;
    for (const char* k : {"preset", "rate", "count", "max_len", "input", "output", "mixture"}) {
      if (w->has(k)) throw ConfigError(w->field(k), "not allowed together with workload.trace");
    }
  } else {
    c.workload = read_workload(*w);
  }
  w->finish();

  if (auto e = top.table("engine")) {
    read_engine(*e, c);
    e->finish();
  }
  if (auto r = top.table("cost")) {
    read_cost(*r, c.setup.cost);
    r->finish();
  }
  if (auto r = top.table("parallelism")) {
    read_parallelism(*r, c.setup.parallelism);
    r->finish();
  }
  if (auto r = top.table("kv")) {
    read_kv(*r, c.setup.kv);
    r->finish();
  }
  auto slo = top.table("slo");
  if (slo) {
    c.setup.slo.ttft_slo = slo->number("ttft", c.setup.slo.ttft_slo);
    c.setup.slo.tpot_slo = slo->number("tpot", c.setup.slo.tpot_slo);
    c.setup.slo.percentile = slo->number("percentile", c.setup.slo.percentile);
    slo->finish();
  } else if (c.setup.engine.kind == EngineKind::kSemiPd && c.setup.engine.dynamic) {
    throw ConfigError("slo", "required when engine.dynamic is true");
  }
  if (auto r = top.table("controller")) {
    c.setup.controller.window_size = r->integer("window_size", c.setup.controller.window_size);
    c.setup.controller.max_step = r->integer("max_step", c.setup.controller.max_step);
    c.setup.controller.step_size = r->number("step_size", c.setup.controller.step_size);
    r->finish();
  }
  if (auto r = top.table("metrics")) {
    c.trim = r->number("trim", c.trim);
    r->finish();
  }
  if (auto r = top.table("sweep")) {
    if (const toml::array* rates = r->array("rates")) {
      for (std::size_t i = 0; i < rates->size(); ++i) {
        c.sweep_rates.push_back(as_number((*rates)[i], r->field("rates")));
      }
    }
    c.threshold = r->number("threshold", c.threshold);
    r->finish();
  }
  top.finish();
  if (c.workload) c.workload->seed = c.seed;
  validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), path.parent_path());
}

std::string to_toml(const ScenarioConfig& c) {
  const auto& s = c.setup;
  std::string o;
  o += fmt::format("name = {}\nseed = {}\noutput_dir = {}\n", quoted(c.name), c.seed,
                   quoted(c.output_dir.generic_string()));

  o += "\n[workload]\n";
  if (c.trace_file) {
    o += fmt::format("trace = {}\n", quoted(c.trace_file->generic_string()));
  } else {
    const auto& w = *c.workload;
    o += fmt::format("rate = {}\ncount = {}\nmax_len = {}\n", num(w.rate), w.count, w.max_len);
    o += fmt::format("input = {}\noutput = {}\n", dist_toml(w.input), dist_toml(w.output));
    for (const auto& m : w.mixture) {
      o += fmt::format("\n[[workload.mixture]]\nweight = {}\n", num(m.weight));
      if (m.input) o += fmt::format("input = {}\n", dist_toml(*m.input));
      if (m.output) o += fmt::format("output = {}\n", dist_toml(*m.output));
    }
  }

  const auto& e = s.engine;
  o += "\n[engine]\n";
  o += fmt::format("kind = \"{}\"\n", to_string(e.kind));
  if (!c.label.empty()) o += fmt::format("label = {}\n", quoted(c.label));
  o += fmt::format("max_batch_size = {}\nchunk_size = {}\n", e.max_batch_size, e.chunk_size);
  o += fmt::format("transfer = \"{}\"\ntransfer_bandwidth = {}\n",
                   e.transfer.kind == TransferMode::Kind::kBandwidth ? "bandwidth"
                                                                     : "one-decode-iteration",
                   num(e.transfer.bytes_per_second));
  o += fmt::format("switch_prep_delay = {}\nnaive_switch = {}\n", num(e.switch_prep_delay),
                   e.naive_switch);
  o += fmt::format("initial_partition = [{}, {}]\n", num(e.initial_partition.x),
                   num(e.initial_partition.y));
  o += fmt::format("dynamic = {}\npreemption = {}\ninstances = {}\n", e.dynamic, e.preemption,
                   e.instances);
  for (const auto& sw : e.switch_schedule) {
    o += fmt::format("\n[[engine.switch_schedule]]\ntime = {}\nx = {}\ny = {}\n", num(sw.time),
                     num(sw.partition.x), num(sw.partition.y));
  }

  const auto& k = s.cost;
  o += "\n[cost]\n";
  o += fmt::format("l100_prefill_base = {}\nprefill_per_token = {}\nprefill_attn_quad = {}\n",
                   num(k.l100_prefill_base), num(k.prefill_per_token), num(k.prefill_attn_quad));
  o += fmt::format("decode_base = {}\ndecode_per_seq = {}\ndecode_per_kv_token = {}\n",
                   num(k.decode_base), num(k.decode_per_seq), num(k.decode_per_kv_token));
  o += fmt::format("kv_bytes_per_token = {}\ngpu_count = {}\n", num(k.kv_bytes_per_token),
                   k.gpu_count);

  const auto& p = s.parallelism;
  o += "\n[parallelism]\n";
  o += fmt::format("tp_prefill = {}\ntp_decode = {}\npp_prefill = {}\npp_decode = {}\n",
                   p.tp_prefill, p.tp_decode, p.pp_prefill, p.pp_decode);
  o += fmt::format("tp_efficiency = {}\n", num(p.tp_efficiency));

  const auto& kv = s.kv;
  o += "\n[kv]\n";
  o += fmt::format("block_size = {}\n", kv.block_size);
  if (kv.capacity_blocks) o += fmt::format("capacity_blocks = {}\n", *kv.capacity_blocks);
  if (kv.prefill_capacity_blocks) {
    o += fmt::format("prefill_capacity_blocks = {}\n", *kv.prefill_capacity_blocks);
  }
  if (kv.decode_capacity_blocks) {
    o += fmt::format("decode_capacity_blocks = {}\n", *kv.decode_capacity_blocks);
  }
  o += fmt::format("gpu_mem_gb = {}\nweight_gb = {}\n", num(kv.gpu_mem_bytes / 1e9),
                   num(kv.weight_bytes / 1e9));

  o += "\n[slo]\n";
  o += fmt::format("ttft = {}\ntpot = {}\npercentile = {}\n", num(s.slo.ttft_slo),
                   num(s.slo.tpot_slo), num(s.slo.percentile));
  o += "\n[controller]\n";
  o += fmt::format("window_size = {}\nmax_step = {}\nstep_size = {}\n", s.controller.window_size,
                   s.controller.max_step, num(s.controller.step_size));
  o += fmt::format("\n[metrics]\ntrim = {}\n", num(c.trim));
  o += "\n[sweep]\nrates = [";
  for (std::size_t i = 0; i < c.sweep_rates.size(); ++i) {
    o += (i ? ", " : "") + num(c.sweep_rates[i]);
  }
  o += fmt::format("]\nthreshold = {}\n", num(c.threshold));
  return o;
}

std::string engine_label(const ScenarioConfig& c) {
  return c.label.empty() ? to_string(c.setup.engine.kind) : c.label;
}

Trace make_trace(const ScenarioConfig& c, std::optional<double> rate) {
  if (c.trace_file) {
    if (rate) throw ConfigError("workload.trace", "a trace file has a fixed arrival rate");
    return load_trace(*c.trace_file).requests;
  }
  TraceParams p = *c.workload;
  p.seed = c.seed;
  if (rate) p.rate = *rate;
  return generate_trace(p);
}

RunOutput run_scenario(const ScenarioConfig& c, std::optional<double> rate) {
  const Trace trace = make_trace(c, rate);
  RunOutput out;
  out.sim = simulate(c.setup, trace);
  out.rows = per_request_metrics(out.sim.records);
  double r = 0.0;
  if (rate) {
    r = *rate;
  } else if (c.workload) {
    r = c.workload->rate;
  } else if (!trace.empty() && trace.back().arrival > 0.0) {
    r = static_cast<double>(trace.size()) / trace.back().arrival;
  }
  out.summary = summarize(out.rows, engine_label(c), r, c.setup.slo, c.trim);
  return out;
}

void write_run(const ScenarioConfig& c, const RunOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "requests.csv", format_requests_csv(out.rows));
  write_text(dir / "summary.csv", summary_csv_header() + format_summary_row(out.summary));
  if (c.setup.engine.dynamic) {
    std::string log = controller_log_header();
    for (const auto& row : out.sim.controller_log) log += format_controller_row(row);
    write_text(dir / "controller.csv", log);
  }
  std::string pools = "pool,capacity_blocks,high_water,first_exhaustion_s\n";
  for (const auto& p : out.sim.pools) {
    pools += fmt::format("{},{},{:.6f},{}\n", p.name, p.capacity, p.high_water,
                         std::isnan(p.first_exhaustion) ? std::string()
                                                        : fmt::format("{:.9f}", p.first_exhaustion));
  }
  write_text(dir / "pools.csv", pools);
  if (c.setup.engine.kind == EngineKind::kSemiPd) {
    std::string sw = "requested_s,adopted_s,instance,worker,x,y\n";
    for (const auto& s : out.sim.switches) {
      sw += fmt::format("{:.9f},{:.9f},{},{},{},{}\n", s.requested, s.adopted, s.instance, s.worker,
                        num(s.partition.x), num(s.partition.y));
    }
    write_text(dir / "switches.csv", sw);
  }
  write_text(dir / "events.digest",
             fmt::format("events {}\ndigest {:016x}\nmakespan_s {:.9f}\nmax_mixed_overlap_s {:.9f}\n",
                         out.sim.events, out.sim.event_digest, out.sim.makespan,
                         out.sim.max_mixed_partition_overlap));
  write_text(dir / "config.resolved.toml", to_toml(c));
}

SweepResult sweep(const ScenarioConfig& c, std::span<const double> rates, double threshold,
                  Execution exec) {
  if (rates.empty()) throw ConfigError("sweep.rates", "at least one rate is required");
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (!(rates[i] > rates[i - 1])) throw ConfigError("sweep.rates", "rates must be strictly ascending");
  }
  const auto n = static_cast<std::int64_t>(rates.size());
  std::vector<Summary> rows(rates.size());
  std::vector<std::exception_ptr> errors(rates.size());
  auto one = [&](std::int64_t i) {
    try {
      rows[static_cast<std::size_t>(i)] = run_scenario(c, rates[static_cast<std::size_t>(i)]).summary;
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::int64_t i = 0; i < n; ++i) one(i);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SweepResult out;
  out.rows = std::move(rows);
  std::vector<double> att;
  for (const auto& r : out.rows) att.push_back(r.attainment);
  out.goodput = max_goodput(rates, att, threshold);
  return out;
}

std::string format_summary_csv(std::span<const Summary> rows) {
  std::string out = summary_csv_header();
  for (const auto& r : rows) out += format_summary_row(r);
  return out;
}

std::vector<Summary> merge_summaries(std::span<const std::vector<Summary>> tables) {
  std::vector<Summary> out;
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& t : tables) {
    for (const auto& r : t) {
      // Key on the rate as written so that reparsed tables compare equal.
      const auto key = std::make_pair(r.engine, fmt::format("{:.6f}", r.rate));
      if (!keys.insert(key).second) {
        throw ConfigError("compare", fmt::format("duplicate (engine, rate) key ({}, {})",
                                                 key.first, key.second));
      }
      out.push_back(r);
    }
  }
  return out;
}

const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> names = {"p50_ttft", "p90_ttft", "p99_ttft",
                                                 "p50_tpot", "p90_tpot", "p99_tpot",
                                                 "attainment", "mean_e2e"};
  return names;
}

std::string long_format(std::span<const Summary> rows, const std::string& metric) {
  static const std::map<std::string, double Summary::*> fields = {
      {"p50_ttft", &Summary::p50_ttft},     {"p90_ttft", &Summary::p90_ttft},
      {"p99_ttft", &Summary::p99_ttft},     {"p50_tpot", &Summary::p50_tpot},
      {"p90_tpot", &Summary::p90_tpot},     {"p99_tpot", &Summary::p99_tpot},
      {"attainment", &Summary::attainment}, {"mean_e2e", &Summary::mean_e2e}};
  const auto it = fields.find(metric);
  if (it == fields.end()) throw ConfigError("metric", "unknown summary metric '" + metric + "'");
  std::string out = "engine,rate," + metric + "\n";
  for (const auto& r : rows) {
    const double v = r.*(it->second);
    out += fmt::format("{},{:.6f},{}\n", r.engine, r.rate,
                       std::isnan(v) ? std::string("nan") : fmt::format("{:.9f}", v));
  }
  return out;
}

}  // namespace simpd
