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

// herman-kit command line front end.

#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "herman/error.hpp"
#include "herman/exact_analysis.hpp"
#include "herman/harness.hpp"
#include "herman/pairing.hpp"
#include "herman/rational.hpp"

namespace {

using herman::ExperimentSpec;
using nlohmann::json;

struct CommonFlags {
  std::string n;
  std::string tokens;
  std::string bits;
  std::string generator;
  int m = -1;
  int samples = 0;
  std::string r;
  std::string lambda;
  std::size_t trials = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::size_t budget_states = 0;
  std::string thresholds;
  std::string mode;
  double tolerance = 0.0;
};

void add_config_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--n", f.n, "ring size, or a comma separated list")->required();
  app->add_option("--tokens", f.tokens, "explicit token positions, e.g. 1,4,7");
  app->add_option("--bits", f.bits, "explicit bit string, e.g. 010010010");
  app->add_option("--generator", f.generator, "equilateral | full | random_bits | flip_m | random_tokens");
  app->add_option("--m", f.m, "bits flipped (flip_m) or token count (random_tokens)");
  app->add_option("--samples", f.samples, "configs per n for random generators");
  app->add_option("--r", f.r, "synchronous pass probability (exact fraction or decimal)");
  app->add_option("--lambda", f.lambda, "asynchronous pass rate");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--out", f.out, "append JSON-lines records here");
}

/// Renders flags as a spec literal so every record echoes a reproducible line.
std::string spec_literal(const CommonFlags& f, std::string_view engine) {
  std::ostringstream s;
  std::string generator = f.generator;
  if (!f.tokens.empty() || !f.bits.empty()) generator = "explicit";
  if (generator.empty()) generator = "equilateral";
  s << "generator=" << generator;
  if (!f.tokens.empty()) s << " tokens=" << f.tokens;
  if (!f.bits.empty()) s << " bits=" << f.bits;
  if (f.m >= 0) s << (generator == "random_tokens" ? " M=" : " m=") << f.m;
  if (f.samples > 0) s << " samples=" << f.samples;
  s << " n=" << f.n;
  if (!f.lambda.empty()) {
    if (!f.r.empty()) throw herman::InvalidInput("give either --r or --lambda, not both");
    s << " variant=async lambda=" << f.lambda;
  } else {
    s << " variant=sync r=" << (f.r.empty() ? "1/2" : f.r);
  }
  s << " engine=" << engine << " seed=" << f.seed;
  if (f.trials > 0) s << " trials=" << f.trials;
  if (f.budget_states > 0) s << " budget_states=" << f.budget_states;
  if (!f.thresholds.empty()) s << " thresholds_n2d=" << f.thresholds;
  if (!f.mode.empty()) s << " mode=" << f.mode;
  if (f.tolerance > 0.0) s << " tolerance=" << f.tolerance;
  return s.str();
}

void emit(const std::vector<json>& records, const std::string& out, std::string_view command,
          const json& seeds) {
  for (const auto& r : records) std::cout << r.dump() << '\n';
  if (!out.empty()) herman::append_records(out, records, {{"command", command}, {"seeds", seeds}});
}

json spec_seeds(const std::vector<ExperimentSpec>& specs) {
  json seeds = json::array();
  for (const auto& s : specs) seeds.push_back({{"line", s.line}, {"seed", s.seed}});
  return seeds;
}

int run_single(const CommonFlags& f, std::string_view engine) {
  const auto spec = herman::parse_spec_line(spec_literal(f, engine), 1);
  emit(herman::run_specs({spec}), f.out, engine, spec_seeds({spec}));
  return 0;
}

herman::ProtocolParams params_from(const CommonFlags& f, std::string& rate_text) {
  if (!f.lambda.empty()) {
    if (!f.r.empty()) throw herman::InvalidInput("give either --r or --lambda, not both");
    rate_text = f.lambda;
    return herman::ProtocolParams::async(herman::to_double(herman::parse_rational(f.lambda)));
  }
  rate_text = f.r.empty() ? "1/2" : f.r;
  return herman::ProtocolParams::sync(herman::to_double(herman::parse_rational(rate_text)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"herman-kit: Herman's token ring protocol, simulated, solved and bounded"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(herman::kToolVersion));

  CommonFlags simulate_f;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the stabilization time");
  add_config_flags(simulate, simulate_f);
  simulate->add_option("--trials", simulate_f.trials, "independent trials")->default_val(1000);
  simulate->add_option("--thresholds", simulate_f.thresholds, "tail thresholds in units of N^2/D");

  CommonFlags exact_f;
  std::string exact_csv;
  auto* exact = app.add_subcommand("exact", "Solve the Markov chain for the expected stabilization time");
  add_config_flags(exact, exact_f);
  exact->add_option("--budget-states", exact_f.budget_states, "state budget")->default_val(5000);
  exact->add_option("--mode", exact_f.mode, "rational | float")->default_val("rational");
  exact->add_option("--csv", exact_csv, "write every solved state as CSV");

  CommonFlags formula_f;
  bool continuous = false;
  std::string terms_csv;
  auto* formula = app.add_subcommand("formula", "Pairing expression for the expected stabilization time");
  add_config_flags(formula, formula_f);
  formula->add_flag("--continuous", continuous, "use the N -> infinity series");
  formula->add_option("--tolerance", formula_f.tolerance, "series truncation tolerance");
  formula->add_option("--terms-csv", terms_csv, "dump every term of the finite expression");

  CommonFlags bounds_f;
  auto* bounds = app.add_subcommand("bounds", "Analytic bounds for a configuration");
  add_config_flags(bounds, bounds_f);

  std::string spec_path;
  std::string inline_spec;
  std::string run_out;
  auto* run = app.add_subcommand("run", "Run experiments from a spec file or one inline spec");
  auto* spec_opt = run->add_option("--spec", spec_path, "spec file, one experiment per line");
  auto* inline_opt = run->add_option("--inline", inline_spec, "a single spec line");
  spec_opt->excludes(inline_opt);
  run->add_option("--out", run_out, "append JSON-lines records here");

  CommonFlags flip_f;
  std::size_t control_trials = 2000;
  auto* study_flip = app.add_subcommand("study-flip", "Flip-m scaling study with an equilateral control");
  study_flip->add_option("--n", flip_f.n, "ring sizes")->default_val("33,65,129,257");
  study_flip->add_option("--m", flip_f.m, "bits flipped")->default_val(1);
  study_flip->add_option("--samples", flip_f.samples, "configs per n")->default_val(32);
  study_flip->add_option("--trials", flip_f.trials, "trials per config")->default_val(500);
  study_flip->add_option("--control-trials", control_trials, "trials for the equilateral control");
  study_flip->add_option("--r", flip_f.r, "synchronous pass probability");
  study_flip->add_option("--lambda", flip_f.lambda, "asynchronous pass rate");
  study_flip->add_option("--seed", flip_f.seed, "base seed");
  study_flip->add_option("--out", flip_f.out, "append JSON-lines records here");

  CommonFlags full_f;
  std::size_t curve_trials = 2000;
  auto* study_full = app.add_subcommand("study-full", "Full configuration: mean, tail and token-count curve");
  study_full->add_option("--n", full_f.n, "ring size")->default_val("101");
  study_full->add_option("--trials", full_f.trials, "trials")->default_val(20000);
  study_full->add_option("--curve-trials", curve_trials, "trials for the token-count curve");
  study_full->add_option("--r", full_f.r, "synchronous pass probability");
  study_full->add_option("--lambda", full_f.lambda, "asynchronous pass rate");
  study_full->add_option("--seed", full_f.seed, "base seed");
  study_full->add_option("--out", full_f.out, "append JSON-lines records here");

  CommonFlags conj_f;
  int sample_tokens = 5;
  auto* study_conj = app.add_subcommand("study-conjecture", "Scan 3-token configurations and sample larger ones");
  study_conj->add_option("--n", conj_f.n, "ring size")->default_val("9");
  study_conj->add_option("--samples", conj_f.samples, "random configurations")->default_val(16);
  study_conj->add_option("--tokens", sample_tokens, "token count of sampled configurations");
  study_conj->add_option("--r", conj_f.r, "synchronous pass probability");
  study_conj->add_option("--lambda", conj_f.lambda, "asynchronous pass rate");
  study_conj->add_option("--trials", conj_f.trials, "Monte Carlo trials for samples beyond the budget")
      ->default_val(4000);
  study_conj->add_option("--budget-states", conj_f.budget_states, "state budget")->default_val(5000);
  study_conj->add_option("--mode", conj_f.mode, "rational | float")->default_val("float");
  study_conj->add_option("--seed", conj_f.seed, "base seed");
  study_conj->add_option("--out", conj_f.out, "append JSON-lines records here");

  std::string records_path;
  std::string plot_kind;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot-data", "Tidy CSV from a record file");
  plot->add_option("--records", records_path, "JSON-lines record file")->required();
  plot->add_option("--kind", plot_kind, "scaling | curve")->required();
  plot->add_option("--out", plot_out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return run_single(simulate_f, "monte_carlo");
    if (bounds->parsed()) return run_single(bounds_f, "bounds");
    if (exact->parsed()) {
      const auto spec = herman::parse_spec_line(spec_literal(exact_f, "exact"), 1);
      emit(herman::run_specs({spec}), exact_f.out, "exact", spec_seeds({spec}));
      if (!exact_csv.empty()) {
        herman::validate_spec(spec);
        herman::SolverOptions opts;
        opts.max_states = spec.budget_states;
        std::ofstream csv(exact_csv);
        if (!csv) throw herman::InvalidInput("cannot write " + exact_csv);
        for (int n : spec.n_list) {
          for (const auto& c : herman::spec_configs(spec, n)) {
            const auto rate = herman::parse_rational(spec.rate_text);
            const auto sol = spec.params.is_sync() ? herman::exact_sync(c, rate, opts)
                                                   : herman::exact_async(c, rate, opts);
            sol.write_csv(csv);
          }
        }
      }
      return 0;
    }
    if (formula->parsed()) {
      const auto spec =
          herman::parse_spec_line(spec_literal(formula_f, continuous ? "continuous_formula" : "finite_formula"), 1);
      emit(herman::run_specs({spec}), formula_f.out, "formula", spec_seeds({spec}));
      if (!terms_csv.empty()) {
        std::ofstream csv(terms_csv);
        if (!csv) throw herman::InvalidInput("cannot write " + terms_csv);
        for (int n : spec.n_list) {
          for (const auto& c : herman::spec_configs(spec, n)) {
            if (c.token_count() < 3) continue;
            std::vector<herman::TermRecord> terms;
            herman::expected_time_finite(c, spec.params.r, {}, &terms);
            herman::write_term_csv(csv, terms);
          }
        }
      }
      return 0;
    }
    if (run->parsed()) {
      std::vector<ExperimentSpec> specs;
      if (!spec_path.empty()) {
        specs = herman::parse_spec_file(spec_path);
      } else if (!inline_spec.empty()) {
        specs.push_back(herman::parse_spec_line(inline_spec, 1));
      } else {
        throw herman::InvalidInput("run needs --spec or --inline");
      }
      emit(herman::run_specs(specs), run_out, "run", spec_seeds(specs));
      return 0;
    }
    if (study_flip->parsed()) {
      herman::FlipScalingOptions o;
      std::string rate;
      o.params = params_from(flip_f, rate);
      o.m = flip_f.m;
      o.n_list = herman::parse_int_list(flip_f.n);
      o.samples = flip_f.samples;
      o.trials = flip_f.trials;
      o.control_trials = control_trials;
      o.seed = flip_f.seed;
      const auto report = herman::study_flip_scaling(o);
      emit(herman::study_records(report), flip_f.out, "study-flip", json::array({flip_f.seed}));
      std::cerr << "E/n spread " << report.ratio_spread << ", R2 linear " << report.r2_linear << ", R2 quadratic "
                << report.r2_quadratic << ", equilateral E/n growth " << report.control_growth << '\n';
      return 0;
    }
    if (study_full->parsed()) {
      herman::FullStudyOptions o;
      std::string rate;
      o.params = params_from(full_f, rate);
      const auto sizes = herman::parse_int_list(full_f.n);
      if (sizes.size() != 1) throw herman::InvalidInput("study-full takes one ring size");
      o.n = sizes.front();
      o.trials = full_f.trials;
      o.curve_trials = curve_trials;
      o.seed = full_f.seed;
      const auto report = herman::study_full(o);
      emit(herman::study_records(report), full_f.out, "study-full", json::array({full_f.seed}));
      std::cerr << "mean " << report.mean << " (ci95 upper " << report.ci_hi << ", bound " << report.mean_bound
                << "), P(T >= 0.02 N^2/D) = " << report.tail_probability << '\n';
      return 0;
    }
    if (study_conj->parsed()) {
      herman::ConjectureOptions o;
      o.params = params_from(conj_f, o.rate_text);
      const auto sizes = herman::parse_int_list(conj_f.n);
      if (sizes.size() != 1) throw herman::InvalidInput("study-conjecture takes one ring size");
      o.n = sizes.front();
      o.sample_size = conj_f.samples;
      o.sample_tokens = sample_tokens;
      o.mc_trials = conj_f.trials;
      o.budget_states = conj_f.budget_states;
      if (conj_f.mode == "rational") {
        o.mode = herman::ArithmeticMode::rational;
      } else if (conj_f.mode == "float") {
        o.mode = herman::ArithmeticMode::float64;
      } else {
        throw herman::InvalidInput("mode must be rational or float");
      }
      o.seed = conj_f.seed;
      const auto report = herman::study_conjecture_scan(o);
      emit(herman::study_records(report), conj_f.out, "study-conjecture", json::array({conj_f.seed}));
      std::cerr << report.coverage << '\n';
      return 0;
    }
    if (plot->parsed()) {
      std::ostringstream csv;
      herman::emit_plot_data(records_path, plot_kind, csv);
      if (plot_out.empty()) {
        std::cout << csv.str();
      } else {
        std::ofstream out(plot_out);
        if (!out) throw herman::InvalidInput("cannot write " + plot_out);
        out << csv.str();
      }
      return 0;
    }
  } catch (const herman::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 4;
}
