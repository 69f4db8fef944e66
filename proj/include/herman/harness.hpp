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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "herman/exact_analysis.hpp"
#include "herman/ring_core.hpp"
#include "json.hpp"

namespace herman {

inline constexpr const char* kToolVersion = "0.3.0";

enum class GeneratorKind { equilateral, full, random_bits, flip_m, random_tokens, explicit_config };
enum class EngineKind { monte_carlo, exact, finite_formula, continuous_formula, bounds };

/// One experiment, usually one line of a spec file:
///
///   generator=flip_m m=1 n=33,65 variant=sync r=1/2 engine=monte_carlo trials=500 seed=7
///
/// Keys: generator, m, samples, tokens, bits, config, n, variant, r, lambda,
/// engine, trials, seed, thresholds_n2d, quantiles, mode, budget_states,
/// tolerance. Unknown keys are rejected.
struct ExperimentSpec {
  int line = 0;
  std::string text;

  GeneratorKind generator = GeneratorKind::equilateral;
  int flip_m = 0;
  int samples = 1;             ///< configs per n for random generators (flip_m defaults to 32)
  int random_tokens = 3;       ///< M for random_tokens
  std::vector<int> tokens;     ///< explicit token positions
  std::string bits;            ///< explicit bit string
  std::vector<int> n_list;

  ProtocolParams params;
  std::string rate_text = "1/2";  ///< r or lambda as written

  EngineKind engine = EngineKind::monte_carlo;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::vector<double> thresholds_n2d;  ///< tail thresholds in units of N^2/D
  std::vector<double> quantiles = {0.5, 0.9, 0.99};
  ArithmeticMode mode = ArithmeticMode::rational;
  std::size_t budget_states = 5000;
  double tolerance = 1e-9;
};

ExperimentSpec parse_spec_line(std::string_view text, int line = 1);
/// Skips blank lines and lines starting with '#'.
std::vector<ExperimentSpec> parse_spec_file(const std::string& path);
/// Odd n, generator arguments and engine/variant compatibility.
void validate_spec(const ExperimentSpec& spec);

std::string_view engine_name(EngineKind e);
std::string_view generator_name(GeneratorKind g);

/// Configurations a spec line produces at ring size n, in a fixed order.
std::vector<RingConfig> spec_configs(const ExperimentSpec& spec, int n);

/// Engine output for one configuration.
nlohmann::json run_engine(const ExperimentSpec& spec, const RingConfig& config, unsigned threads);

struct RunSettings {
  unsigned threads = 0;  ///< 0: default_thread_count()
};

/// One record per (spec line, n, config), sorted by line, then n, then config.
/// Engine errors are rethrown with the spec line prefixed.
std::vector<nlohmann::json> run_specs(const std::vector<ExperimentSpec>& specs, const RunSettings& settings = {});

/// 64-bit FNV-1a over the record with wall_time, timestamp and payload_hash removed.
std::string payload_hash(const nlohmann::json& record);

/// Stamps tool_version, timestamp, wall_time and payload_hash.
void finalize_record(nlohmann::json& record, double wall_time);

/// Appends records as JSON lines and (re)writes `<path>.manifest.json`.
void append_records(const std::string& path, const std::vector<nlohmann::json>& records,
                    const nlohmann::json& manifest_extra = nlohmann::json::object());

std::vector<nlohmann::json> read_records(const std::string& path);

// ---------------------------------------------------------------------------
// Studies

struct ScalingPoint {
  int n = 0;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double bound = 0.0;  ///< worst_case_bound(n, D)
};

struct FlipScalingReport {
  int m = 0;
  ProtocolParams params;
  std::vector<ScalingPoint> flip;
  std::vector<ScalingPoint> control;  ///< equilateral configuration at the same sizes
  double r2_linear = 0.0;             ///< E ~ a + b n
  double r2_quadratic = 0.0;          ///< E ~ a + b n^2
  double ratio_spread = 0.0;          ///< max/min of E/n
  double control_growth = 0.0;        ///< control E/n at largest n over smallest n
};

struct FlipScalingOptions {
  int m = 1;
  std::vector<int> n_list;
  ProtocolParams params;
  std::size_t trials = 500;  ///< per sampled config
  int samples = 32;
  std::size_t control_trials = 2000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

/// Censored trials abort the study with a ResourceError.
FlipScalingReport study_flip_scaling(const FlipScalingOptions& options);

/// Coefficient of determination of the least squares fit y ~ a + b x.
double r_squared(std::span<const double> x, std::span<const double> y);

struct CurvePoint {
  double t = 0.0;
  double s_emp = 0.0;
  double s_tilde = 0.0;
  double s_finite = 0.0;
};

struct FullStudyReport {
  int n = 0;
  ProtocolParams params;
  nlohmann::json summary;  ///< Monte Carlo summary with tail at 0.02 N^2/D
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double mean_bound = 0.0;        ///< 0.0285 N^2/D
  double median_threshold = 0.0;  ///< 0.02 N^2/D
  double tail_probability = 0.0;
  double tail_wilson_hi = 0.0;
  double equilateral_time = 0.0;  ///< N^2/(27D)
  std::vector<CurvePoint> curve;
};

struct FullStudyOptions {
  int n = 101;
  ProtocolParams params;
  std::size_t trials = 20'000;
  std::size_t curve_trials = 2000;
  int curve_points = 40;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

FullStudyReport study_full(const FullStudyOptions& options);

struct ConjectureSample {
  RingConfig config;
  double expected = 0.0;
  double ci_hi = 0.0;  ///< equals expected when solved exactly
  bool exact = true;
};

struct ConjectureReport {
  int n = 0;
  ProtocolParams params;
  std::size_t three_token_configs = 0;  ///< rotation classes scanned (token at position 1)
  double max_three = 0.0;
  std::vector<int> argmax_gaps;
  bool max_near_equilateral = false;  ///< gaps differ by at most one
  std::vector<ConjectureSample> samples;
  int sample_tokens = 5;
  double sample_max = 0.0;
  bool samples_below_max = true;
  std::string coverage;  ///< plain-language sample coverage statement
};

struct ConjectureOptions {
  int n = 9;
  ProtocolParams params;
  std::string rate_text = "1/2";
  int sample_tokens = 5;
  int sample_size = 16;
  std::uint64_t seed = 1;
  std::size_t budget_states = 5000;
  std::size_t mc_trials = 4000;  ///< for samples beyond the exact budget
  ArithmeticMode mode = ArithmeticMode::float64;
  unsigned threads = 0;
};

/// Budget overruns in the 3-token scan raise ResourceError.
ConjectureReport study_conjecture_scan(const ConjectureOptions& options);

nlohmann::json to_json(const FlipScalingReport& report);
nlohmann::json to_json(const FullStudyReport& report);
nlohmann::json to_json(const ConjectureReport& report);

/// Records for a study, ready for append_records.
std::vector<nlohmann::json> study_records(const FlipScalingReport& report);
std::vector<nlohmann::json> study_records(const FullStudyReport& report);
std::vector<nlohmann::json> study_records(const ConjectureReport& report);

/// Tidy CSV from a record file. kind "scaling": n,mean,ci_lo,ci_hi,bound.
/// kind "curve": t,S_emp,S_tilde. Missing fields raise SchemaError.
void emit_plot_data(const std::string& record_path, std::string_view kind, std::ostream& out);

}  // namespace herman
