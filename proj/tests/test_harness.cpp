/*
 * Copyright (c) 2026, The herman-kit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "herman/error.hpp"
#include "herman/harness.hpp"

using namespace herman;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "herman_kit_tests";
  fs::create_directories(dir);
  const auto path = dir / name;
  fs::remove(path);
  fs::remove(path.string() + ".manifest.json");
  return path;
}

int cli(const std::string& args) {
  const std::string cmd = std::string(HERMAN_KIT_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

json run_one(const std::string& line) {
  const auto records = run_specs({parse_spec_line(line)}, {2});
  REQUIRE(records.size() == 1);
  return records.front();
}

}  // namespace

TEST_CASE("spec lines parse into experiments") {
  const auto s = parse_spec_line("generator=flip_m m=2 n=33,65 variant=sync r=3/10 engine=monte_carlo trials=50 seed=9");
  CHECK(s.generator == GeneratorKind::flip_m);
  CHECK(s.flip_m == 2);
  CHECK(s.samples == 32);
  CHECK(s.n_list == std::vector<int>{33, 65});
  CHECK(s.params.r == doctest::Approx(0.3));
  CHECK(s.trials == 50);
  CHECK(s.seed == 9);
  const auto a = parse_spec_line("generator=flip_m(1) n=9 variant=async lambda=2 engine=exact");
  CHECK(a.flip_m == 1);
  CHECK_FALSE(a.params.is_sync());
  const auto e = parse_spec_line("config=N=9;tokens=1,4,7 engine=bounds");
  CHECK(e.generator == GeneratorKind::explicit_config);
  CHECK(e.n_list == std::vector<int>{9});
}

TEST_CASE("bad spec lines are invalid input naming the line") {
  CHECK_THROWS_AS(parse_spec_line("generator=triangle n=9", 4), InvalidInput);
  CHECK_THROWS_AS(parse_spec_line("n=9 colour=red"), InvalidInput);
  CHECK_THROWS_AS(parse_spec_line("n=9 n=11"), InvalidInput);
  CHECK_THROWS_AS(parse_spec_line("n=9 variant=async r=1/2"), InvalidInput);
  CHECK_THROWS_AS(parse_spec_line("n=9 r=3/2"), InvalidInput);
  try {
    parse_spec_line("generator=triangle n=9", 4);
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("spec line 4") != std::string::npos);
  }
  CHECK_THROWS_AS(validate_spec(parse_spec_line("n=10")), InvalidInput);
  CHECK_THROWS_AS(validate_spec(parse_spec_line("n=9 variant=async lambda=1 engine=finite_formula")), InvalidInput);
  CHECK_THROWS_AS(validate_spec(parse_spec_line("generator=full n=41 engine=finite_formula")), ResourceError);
  CHECK_THROWS_AS(validate_spec(parse_spec_line("n=9 engine=exact budget_states=999999999")), ResourceError);
}

TEST_CASE("equilateral n=9 exact payload is 12") {
  const auto r = run_one("generator=equilateral n=9 r=1/2 engine=exact");
  CHECK(r["payload"]["expected_time_exact"] == "12");
  CHECK(r["payload"]["expected_time"].get<double>() == 12.0);
  CHECK(r["config"] == "N=9;tokens=1,4,7");
}

TEST_CASE("a single token gives zero on every engine") {
  for (const char* engine : {"monte_carlo", "exact", "finite_formula", "continuous_formula"}) {
    const auto r = run_one(std::string("generator=explicit tokens=3 n=9 engine=") + engine);
    if (std::string(engine) == "monte_carlo") {
      CHECK(r["payload"]["estimate"]["mean"].get<double>() == 0.0);
    } else {
      CHECK(r["payload"]["expected_time"].get<double>() == 0.0);
    }
  }
}

TEST_CASE("full ring Monte Carlo payload carries the tail probability and bound") {
  const auto r = run_one("generator=full n=101 r=1/2 engine=monte_carlo trials=10000 thresholds_n2d=0.02 seed=3");
  const auto& p = r["payload"];
  REQUIRE(p["estimate"]["tail_probs"].size() == 1);
  CHECK(p["estimate"]["tail_probs"][0]["threshold"].get<double>() == doctest::Approx(0.02 * 101 * 101 * 4));
  CHECK(p["estimate"]["tail_probs"][0]["probability"].get<double>() < 0.5);
  CHECK(p["bound_violation"] == false);
  CHECK(p.contains("worst_case_bound"));
}

TEST_CASE("records are ordered by line then n and hashes ignore timestamps") {
  std::vector<ExperimentSpec> specs = {parse_spec_line("n=13,9 engine=bounds", 3),
                                       parse_spec_line("generator=random_tokens M=3 samples=2 n=11 engine=exact", 5)};
  const auto recs = run_specs(specs, {3});
  REQUIRE(recs.size() == 4);
  CHECK(recs[0]["n"] == 9);
  CHECK(recs[1]["n"] == 13);
  CHECK(recs[2]["config_index"] == 0);
  CHECK(recs[3]["config_index"] == 1);
  auto copy = recs[0];
  copy["timestamp"] = "1970-01-01T00:00:00Z";
  copy["wall_time"] = 99.0;
  CHECK(payload_hash(copy) == recs[0]["payload_hash"]);
  copy["payload"]["worst_case_bound"] = 1.0;
  CHECK(payload_hash(copy) != recs[0]["payload_hash"]);
}

TEST_CASE("re-running with another thread count reproduces every hash") {
  const auto specs = parse_spec_file(std::string(HERMAN_SPEC_DIR) + "/smoke.spec");
  const auto a = run_specs(specs, {1});
  const auto b = run_specs(specs, {5});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]["payload_hash"] == b[i]["payload_hash"]);
}

TEST_CASE("every bundled spec parses and validates") {
  int files = 0;
  for (const auto& entry : fs::directory_iterator(HERMAN_SPEC_DIR)) {
    if (entry.path().extension() != ".spec") continue;
    ++files;
    for (const auto& s : parse_spec_file(entry.path().string())) CHECK_NOTHROW(validate_spec(s));
  }
  CHECK(files >= 3);
}

TEST_CASE("engine errors carry the spec line") {
  try {
    run_specs({parse_spec_line("generator=full n=15 engine=exact budget_states=100", 7)});
    FAIL("expected a resource error");
  } catch (const ResourceError& e) {
    CHECK(std::string(e.what()).find("spec line 7") != std::string::npos);
  }
}

TEST_CASE("records append and a manifest is written") {
  const auto path = scratch("append.jsonl");
  const auto recs = run_specs({parse_spec_line("n=9 engine=bounds")});
  append_records(path.string(), recs);
  append_records(path.string(), recs);
  CHECK(read_records(path.string()).size() == 2);
  std::ifstream side(path.string() + ".manifest.json");
  REQUIRE(side.good());
  const auto manifest = json::parse(side);
  CHECK(manifest["tool_version"] == kToolVersion);
  CHECK(manifest.contains("host"));
}

TEST_CASE("flip-0 study is identically zero") {
  FlipScalingOptions o;
  o.m = 0;
  o.n_list = {9, 19, 37};
  o.samples = 2;
  o.trials = 10;
  o.control_trials = 200;
  const auto rep = study_flip_scaling(o);
  for (const auto& p : rep.flip) CHECK(p.mean == 0.0);
  o.n_list = {9, 11, 13};
  CHECK_THROWS_AS(study_flip_scaling(o), InvalidInput);
}

TEST_CASE("r squared on exact lines and parabolas") {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> line{3, 5, 7, 9};
  const std::vector<double> para{1, 4, 9, 16};
  CHECK(r_squared(x, line) == doctest::Approx(1.0));
  CHECK(r_squared(x, para) < 1.0);
}

TEST_CASE("conjecture scan finds the equilateral maximum") {
  ConjectureOptions o;
  o.n = 9;
  o.sample_size = 4;
  auto rep = study_conjecture_scan(o);
  CHECK(rep.max_three == doctest::Approx(12.0));
  CHECK(rep.argmax_gaps == std::vector<int>{3, 3, 3});
  CHECK(rep.three_token_configs == 28);
  o.n = 11;
  o.sample_size = 6;
  rep = study_conjecture_scan(o);
  auto gaps = rep.argmax_gaps;
  std::sort(gaps.begin(), gaps.end());
  CHECK(gaps == std::vector<int>{3, 4, 4});
  CHECK(rep.max_near_equilateral);
  CHECK(rep.max_three == doctest::Approx(48.0 / 11.0 / 0.25));
  CHECK(rep.samples.size() == 6);
  CHECK(rep.coverage.find("not ruled out") != std::string::npos);
  o.budget_states = 10;
  CHECK_THROWS_AS(study_conjecture_scan(o), ResourceError);
}

TEST_CASE("plot data: scaling and curve tables") {
  const auto path = scratch("plot.jsonl");
  FlipScalingReport rep;
  for (int n : {65, 33, 257, 129}) rep.flip.push_back({n, 2.0 * n, 1.9 * n, 2.1 * n, 0.64 * n * n});
  rep.control = rep.flip;
  append_records(path.string(), study_records(rep));
  std::ostringstream csv;
  emit_plot_data(path.string(), "scaling", csv);
  std::istringstream in(csv.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "n,mean,ci_lo,ci_hi,bound");
  std::vector<int> ns;
  for (std::string row; std::getline(in, row);) ns.push_back(std::stoi(row.substr(0, row.find(','))));
  CHECK(ns == std::vector<int>{33, 65, 129, 257});

  FullStudyReport full;
  full.n = 101;
  full.params = ProtocolParams::sync(0.5);
  full.curve = {{10.0, 50.0, 49.0, 49.5}, {20.0, 30.0, 29.0, 29.5}};
  const auto curve_path = scratch("curve.jsonl");
  append_records(curve_path.string(), study_records(full));
  std::ostringstream curve;
  emit_plot_data(curve_path.string(), "curve", curve);
  const std::string table = curve.str();
  CHECK(table.rfind("t,S_emp,S_tilde\n", 0) == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}

TEST_CASE("plot data schema errors") {
  const auto empty = scratch("empty.jsonl");
  std::ofstream(empty.string()).close();
  std::ostringstream sink;
  CHECK_THROWS_AS(emit_plot_data(empty.string(), "scaling", sink), SchemaError);

  const auto broken = scratch("broken.jsonl");
  std::ofstream(broken.string()) << R"({"kind":"scaling_point","payload":{"n":33,"mean":1.0,"ci_hi":2.0,"bound":3.0}})"
                                 << '\n';
  try {
    emit_plot_data(broken.string(), "scaling", sink);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("ci_lo") != std::string::npos);
  }
}

TEST_CASE("command line exit codes") {
  CHECK(cli("exact --n 9 --r 1/2") == 0);
  CHECK(cli("exact --n 10") == 2);
  CHECK(cli("simulate --n 9 --r 2") == 2);
  CHECK(cli("bogus") == 2);
  CHECK(cli("exact --n 15 --generator full --budget-states 100") == 3);
  CHECK(cli("run --inline 'n=9 engine=bounds'") == 0);
  CHECK(cli("run --spec /nonexistent.spec") == 2);
  const auto empty = scratch("cli_empty.jsonl");
  std::ofstream(empty.string()).close();
  CHECK(cli("plot-data --records " + empty.string() + " --kind scaling") == 2);
}

TEST_CASE("full-configuration token curve follows the Brownian limit") {
  FullStudyOptions o;
  o.n = 101;
  o.params = ProtocolParams::sync(0.5);
  o.trials = 1000;
  o.curve_trials = 2000;
  o.curve_points = 12;
  o.seed = 21;
  const auto rep = study_full(o);
  REQUIRE(rep.curve.size() == 12);
  for (const auto& p : rep.curve) {
    CHECK(std::fabs(p.s_emp - p.s_tilde) < 0.15);
    CHECK(std::fabs(p.s_finite - p.s_tilde) < 0.05);
  }
  CHECK(rep.mean < rep.equilateral_time);
  const auto records = study_records(rep);
  CHECK(records.size() == 2);
  CHECK(records[1]["kind"] == "token_curve");
}
