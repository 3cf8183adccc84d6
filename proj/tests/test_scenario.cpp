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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "simpd/error.hpp"
#include "simpd/scenario.hpp"

using namespace simpd;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
name = "small"
seed = 3

[workload]
preset = "sharegpt-like"
rate = 6.0
count = 300

[engine]
kind = "semi-pd"
initial_partition = [70, 80]
instances = 2

[slo]
ttft = 0.3
tpot = 0.15
)";

// Appends a minimal workload unless the text brings its own.
std::string field_of(const std::string& text) {
  const bool own = text.find("[workload]") != std::string::npos;
  try {
    parse_scenario(own ? text : text + "\n[workload]\nrate = 1.0\ncount = 10\n");
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse a scenario") {
  const auto c = parse_scenario(kSmall);
  CHECK(c.name == "small");
  CHECK(c.seed == 3);
  REQUIRE(c.workload.has_value());
  CHECK(c.workload->rate == 6.0);
  CHECK(c.workload->count == 300);
  CHECK(c.setup.engine.kind == EngineKind::kSemiPd);
  CHECK(c.setup.engine.initial_partition == PartitionConfig{70, 80});
  CHECK(c.setup.engine.instances == 2);
  CHECK(engine_label(c) == "semi-pd");
}

TEST_CASE("bad fields are reported by dotted path") {
  CHECK(field_of("[engine]\nkind = \"vllm\"\n") == "engine.kind");
  CHECK(field_of("[engine]\ninitial_partition = [0, 50]\n") == "engine.initial_partition");
  CHECK(field_of("[workload]\nrate = -1.0\ncount = 10\n") == "workload.rate");
  CHECK(field_of("[engine]\nbogus = 1\n") == "engine.bogus");
  CHECK(field_of("[engine]\nkind = \"semi-pd\"\ndynamic = true\n") == "slo");
  CHECK(field_of("[slo]\nttft = 0.3\ntpot = 0.1\npercentile = 0.0\n") == "slo.percentile");
  CHECK(field_of("seed = \"x\"\n") == "seed");
  CHECK(field_of("this is not toml") == "toml");
}

TEST_CASE("resolved TOML reloads to the same config") {
  const auto c = parse_scenario(kSmall);
  const std::string once = to_toml(c);
  const auto back = parse_scenario(once);
  CHECK(to_toml(back) == once);
  CHECK(back.setup.cost.prefill_per_token == c.setup.cost.prefill_per_token);
  CHECK(back.workload->input.index() == c.workload->input.index());
}

TEST_CASE("repeated runs write byte-identical outputs") {
  auto c = parse_scenario(kSmall);
  c.setup.engine.dynamic = true;
  c.setup.controller.window_size = 50;
  const fs::path root = fs::temp_directory_path() / "simpd_test_scenario";
  fs::remove_all(root);
  write_run(c, run_scenario(c), root / "a");
  write_run(c, run_scenario(c), root / "b");
  for (const char* f : {"requests.csv", "summary.csv", "controller.csv", "pools.csv", "switches.csv",
                        "events.digest", "config.resolved.toml"}) {
    INFO(f);
    REQUIRE(fs::exists(root / "a" / f));
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }
  fs::remove_all(root);
}

TEST_CASE("sweep gives one row per rate and matches the serial reference") {
  const auto c = parse_scenario(kSmall);
  const std::vector<double> rates{4, 8, 12};
  const auto par = sweep(c, rates, 0.9, Execution::kParallel);
  const auto ser = sweep(c, rates, 0.9, Execution::kSerial);
  REQUIRE(par.rows.size() == 3);
  CHECK(format_summary_csv(par.rows) == format_summary_csv(ser.rows));
  CHECK(par.goodput.rate == ser.goodput.rate);
  std::vector<double> att;
  for (const auto& r : par.rows) att.push_back(r.attainment);
  CHECK(par.goodput.rate == max_goodput(rates, att, 0.9).rate);
  CHECK(par.rows[1].rate == 8);
}

TEST_CASE("merged summaries reject duplicate keys") {
  Summary a;
  a.engine = "x";
  a.rate = 4;
  Summary b = a;
  b.rate = 8;
  const std::vector<std::vector<Summary>> ok{{a}, {b}};
  const auto merged = merge_summaries(ok);
  CHECK(merged.size() == 2);
  CHECK(format_summary_csv(merged) == format_summary_csv(std::vector<Summary>{a, b}));
  const std::vector<std::vector<Summary>> dup{{a}, {a}};
  CHECK_THROWS_AS(merge_summaries(dup), ConfigError);
}

TEST_CASE("long format has one row per summary") {
  Summary a;
  a.engine = "x";
  a.rate = 4;
  a.p90_ttft = 0.25;
  const std::vector<Summary> rows{a};
  const std::string text = long_format(rows, "p90_ttft");
  CHECK(text.find("x,4") != std::string::npos);
  CHECK(text.find("0.25") != std::string::npos);
  CHECK_THROWS(long_format(rows, "nope"));
}
