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

#include "herman/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "herman/dynamics.hpp"
#include "herman/error.hpp"
#include "herman/pairing.hpp"
#include "herman/parallel.hpp"
#include "herman/rational.hpp"
#include "herman/rng.hpp"

namespace herman {

using nlohmann::json;

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidInput("bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return value;
}

std::vector<double> parse_double_list(std::string_view text, std::string_view key) {
  std::vector<double> out;
  for (auto part : split(text, ',')) {
    if (!part.empty()) out.push_back(parse_number<double>(part, key));
  }
  return out;
}

[[noreturn]] void rethrow_in_context(const std::string& prefix) {
  try {
    throw;
  } catch (const SchemaError& e) {
    throw SchemaError(prefix + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput(prefix + e.what());
  } catch (const ResourceError& e) {
    throw ResourceError(prefix + e.what());
  } catch (const std::exception& e) {
    throw EngineError(prefix + e.what());
  }
}

std::uint64_t derived_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  TrialRng rng(base, (a << 24) ^ b);
  return rng.engine()();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string host_name() {
  char buf[256] = {};
  if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

unsigned resolve_threads(unsigned requested) { return requested == 0 ? default_thread_count() : requested; }

json params_json(const ProtocolParams& p) {
  json j;
  j["variant"] = p.is_sync() ? "sync" : "async";
  if (p.is_sync()) {
    j["r"] = p.r;
  } else {
    j["lambda"] = p.lambda;
  }
  j["D"] = p.diffusion();
  return j;
}

}  // namespace

std::string_view engine_name(EngineKind e) {
  switch (e) {
    case EngineKind::monte_carlo: return "monte_carlo";
    case EngineKind::exact: return "exact";
    case EngineKind::finite_formula: return "finite_formula";
    case EngineKind::continuous_formula: return "continuous_formula";
    case EngineKind::bounds: return "bounds";
  }
  return "?";
}

std::string_view generator_name(GeneratorKind g) {
  switch (g) {
    case GeneratorKind::equilateral: return "equilateral";
    case GeneratorKind::full: return "full";
    case GeneratorKind::random_bits: return "random_bits";
    case GeneratorKind::flip_m: return "flip_m";
    case GeneratorKind::random_tokens: return "random_tokens";
    case GeneratorKind::explicit_config: return "explicit";
  }
  return "?";
}

ExperimentSpec parse_spec_line(std::string_view text, int line) {
  ExperimentSpec spec;
  spec.line = line;
  spec.text = std::string(text);
  bool samples_given = false;
  bool variant_async = false;
  std::string r_text;
  std::string lambda_text;
  try {
    std::istringstream in{std::string(text)};
    std::string item;
    std::set<std::string> seen;
    while (in >> item) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) throw InvalidInput("expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string_view value = std::string_view(item).substr(eq + 1);
      if (!seen.insert(key).second) throw InvalidInput("duplicate key " + key);
      if (key == "generator") {
        if (value == "equilateral") {
          spec.generator = GeneratorKind::equilateral;
        } else if (value == "full") {
          spec.generator = GeneratorKind::full;
        } else if (value == "random_bits") {
          spec.generator = GeneratorKind::random_bits;
        } else if (value == "flip_m") {
          spec.generator = GeneratorKind::flip_m;
        } else if (value.starts_with("flip_m(") && value.ends_with(")")) {
          spec.generator = GeneratorKind::flip_m;
          spec.flip_m = parse_number<int>(value.substr(7, value.size() - 8), "flip_m");
        } else if (value == "random_tokens") {
          spec.generator = GeneratorKind::random_tokens;
        } else if (value == "explicit") {
          spec.generator = GeneratorKind::explicit_config;
        } else {
          throw InvalidInput("unknown generator '" + std::string(value) + "'");
        }
      } else if (key == "m") {
        spec.flip_m = parse_number<int>(value, key);
      } else if (key == "M") {
        spec.random_tokens = parse_number<int>(value, key);
      } else if (key == "samples") {
        spec.samples = parse_number<int>(value, key);
        samples_given = true;
      } else if (key == "tokens") {
        spec.tokens = parse_int_list(value);
        spec.generator = GeneratorKind::explicit_config;
      } else if (key == "bits") {
        spec.bits = std::string(value);
        spec.generator = GeneratorKind::explicit_config;
      } else if (key == "config") {
        const auto c = parse_config_literal(value);
        spec.tokens = c.token_positions();
        spec.generator = GeneratorKind::explicit_config;
        if (spec.n_list.empty()) spec.n_list = {c.size()};
      } else if (key == "n") {
        spec.n_list = parse_int_list(value);
      } else if (key == "variant") {
        if (value == "sync") {
          variant_async = false;
        } else if (value == "async") {
          variant_async = true;
        } else {
          throw InvalidInput("variant must be sync or async");
        }
      } else if (key == "r") {
        r_text = std::string(value);
      } else if (key == "lambda") {
        lambda_text = std::string(value);
      } else if (key == "engine") {
        if (value == "monte_carlo") {
          spec.engine = EngineKind::monte_carlo;
        } else if (value == "exact") {
          spec.engine = EngineKind::exact;
        } else if (value == "finite_formula") {
          spec.engine = EngineKind::finite_formula;
        } else if (value == "continuous_formula") {
          spec.engine = EngineKind::continuous_formula;
        } else if (value == "bounds") {
          spec.engine = EngineKind::bounds;
        } else {
          throw InvalidInput("unknown engine '" + std::string(value) + "'");
        }
      } else if (key == "trials") {
        spec.trials = parse_number<std::size_t>(value, key);
      } else if (key == "seed") {
        spec.seed = parse_number<std::uint64_t>(value, key);
      } else if (key == "thresholds_n2d") {
        spec.thresholds_n2d = parse_double_list(value, key);
      } else if (key == "quantiles") {
        spec.quantiles = parse_double_list(value, key);
      } else if (key == "mode") {
        if (value == "rational") {
          spec.mode = ArithmeticMode::rational;
        } else if (value == "float") {
          spec.mode = ArithmeticMode::float64;
        } else {
          throw InvalidInput("mode must be rational or float");
        }
      } else if (key == "budget_states") {
        spec.budget_states = parse_number<std::size_t>(value, key);
      } else if (key == "tolerance") {
        spec.tolerance = parse_number<double>(value, key);
      } else {
        throw InvalidInput("unknown key '" + key + "'");
      }
    }
    if (spec.generator == GeneratorKind::flip_m && !samples_given) spec.samples = 32;
    if (variant_async) {
      if (!r_text.empty()) throw InvalidInput("r given for the asynchronous variant; use lambda");
      spec.rate_text = lambda_text.empty() ? "1" : lambda_text;
      spec.params = ProtocolParams::async(to_double(parse_rational(spec.rate_text)));
    } else {
      if (!lambda_text.empty()) throw InvalidInput("lambda given for the synchronous variant; use r");
      spec.rate_text = r_text.empty() ? "1/2" : r_text;
      spec.params = ProtocolParams::sync(to_double(parse_rational(spec.rate_text)));
    }
  } catch (...) {
    rethrow_in_context("spec line " + std::to_string(line) + ": ");
  }
  return spec;
}

std::vector<ExperimentSpec> parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open spec file " + path);
  std::vector<ExperimentSpec> specs;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    const auto last = text.find_last_not_of(" \t\r");
    specs.push_back(parse_spec_line(std::string_view(text).substr(first, last - first + 1), line));
  }
  if (specs.empty()) throw InvalidInput("spec file " + path + " has no experiments");
  return specs;
}

void validate_spec(const ExperimentSpec& spec) {
  try {
    if (spec.n_list.empty()) throw InvalidInput("no ring sizes (n=...)");
    for (int n : spec.n_list) {
      if (n < 3 || n % 2 == 0) throw InvalidInput("ring size must be odd and at least 3, got " + std::to_string(n));
    }
    if (spec.samples < 1) throw InvalidInput("samples must be positive");
    switch (spec.generator) {
      case GeneratorKind::flip_m:
        for (int n : spec.n_list) {
          if (spec.flip_m < 0 || 2 * spec.flip_m + 1 > n) throw InvalidInput("flip-m needs 0 <= m and 2m+1 <= n");
        }
        break;
      case GeneratorKind::random_tokens:
        for (int n : spec.n_list) {
          if (spec.random_tokens < 1 || spec.random_tokens % 2 == 0 || spec.random_tokens > n) {
            throw InvalidInput("random_tokens needs an odd M <= n");
          }
        }
        break;
      case GeneratorKind::explicit_config:
        if (spec.tokens.empty() == spec.bits.empty()) throw InvalidInput("explicit generator needs tokens or bits");
        if (spec.n_list.size() != 1) throw InvalidInput("explicit configurations take exactly one n");
        (void)spec_configs(spec, spec.n_list.front());
        break;
      default:
        break;
    }
    const bool formula = spec.engine == EngineKind::finite_formula || spec.engine == EngineKind::continuous_formula;
    if (formula && !spec.params.is_sync()) throw InvalidInput("formula engines cover the synchronous variant only");
    if (spec.engine == EngineKind::monte_carlo && spec.trials < 2) throw InvalidInput("monte_carlo needs trials >= 2");
    if (spec.engine == EngineKind::exact && spec.budget_states > kHardStateLimit) {
      throw ResourceError("budget_states " + std::to_string(spec.budget_states) + " exceeds the hard limit " +
                          std::to_string(kHardStateLimit));
    }
    if (spec.engine == EngineKind::finite_formula) {
      // Cost check for deterministic generators before anything runs.
      for (int n : spec.n_list) {
        int tokens = 0;
        if (spec.generator == GeneratorKind::full) tokens = n;
        if (spec.generator == GeneratorKind::random_tokens) tokens = spec.random_tokens;
        if (tokens < 3) continue;
        const int m = (tokens - 1) / 2;
        double cost = std::pow(n - 1.0, m);
        for (int i = m + 1; i <= tokens; ++i) cost *= i;
        if (cost > FiniteOptions{}.max_terms) {
          throw ResourceError("finite formula at n=" + std::to_string(n) + " needs about " + std::to_string(cost) +
                              " terms");
        }
      }
    }
    for (double q : spec.quantiles) {
      if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile levels must lie in [0,1]");
    }
  } catch (...) {
    rethrow_in_context("spec line " + std::to_string(spec.line) + ": ");
  }
}

std::vector<RingConfig> spec_configs(const ExperimentSpec& spec, int n) {
  std::vector<RingConfig> out;
  const auto nn = static_cast<std::uint64_t>(n);
  switch (spec.generator) {
    case GeneratorKind::equilateral: out.push_back(gen_equilateral(n)); break;
    case GeneratorKind::full: out.push_back(gen_full(n)); break;
    case GeneratorKind::random_bits:
      for (int s = 0; s < spec.samples; ++s) out.push_back(gen_random_bits(n, derived_seed(spec.seed, nn, s)));
      break;
    case GeneratorKind::flip_m:
      for (int s = 0; s < spec.samples; ++s) {
        out.push_back(gen_flip_m(n, spec.flip_m, derived_seed(spec.seed, nn, s)));
      }
      break;
    case GeneratorKind::random_tokens:
      for (int s = 0; s < spec.samples; ++s) {
        out.push_back(gen_random_tokens(n, spec.random_tokens, derived_seed(spec.seed, nn, s)));
      }
      break;
    case GeneratorKind::explicit_config:
      if (!spec.tokens.empty()) {
        out.push_back(RingConfig::from_tokens(n, spec.tokens));
      } else {
        if (static_cast<int>(spec.bits.size()) != n) throw InvalidInput("bit string length differs from n");
        std::vector<std::uint8_t> bits;
        for (char ch : spec.bits) {
          if (ch != '0' && ch != '1') throw InvalidInput("bits must be a 0/1 string");
          bits.push_back(static_cast<std::uint8_t>(ch - '0'));
        }
        out.push_back(RingConfig::from_bits(n, bits));
      }
      break;
  }
  return out;
}

json run_engine(const ExperimentSpec& spec, const RingConfig& config, unsigned threads) {
  const int n = config.size();
  const int tokens = config.token_count();
  const double d = spec.params.diffusion();
  json payload;
  payload["tokens"] = tokens;
  payload["D"] = d;
  switch (spec.engine) {
    case EngineKind::monte_carlo: {
      MonteCarloOptions opts;
      opts.trials = spec.trials;
      opts.base_seed = derived_seed(spec.seed, static_cast<std::uint64_t>(n), 0x5eedULL);
      opts.quantiles = spec.quantiles;
      for (double x : spec.thresholds_n2d) opts.thresholds.push_back(x * n * n / d);
      opts.threads = threads;
      const auto summary = monte_carlo(config, spec.params, opts);
      payload["estimate"] = to_json(summary);
      const double bound = worst_case_bound(n, d);
      payload["worst_case_bound"] = bound;
      payload["bound_violation"] = summary.ci95.lo > bound;
      break;
    }
    case EngineKind::exact: {
      SolverOptions opts;
      opts.max_states = spec.budget_states;
      const bool rational = spec.mode == ArithmeticMode::rational;
      ExactSolution sol;
      if (rational) {
        const Rational rate = parse_rational(spec.rate_text);
        sol = spec.params.is_sync() ? exact_sync(config, rate, opts) : exact_async(config, rate, opts);
      } else {
        const double rate = spec.params.is_sync() ? spec.params.r : spec.params.lambda;
        sol = spec.params.is_sync() ? exact_sync(config, rate, opts) : exact_async(config, rate, opts);
      }
      const auto& start = sol.start();
      payload["expected_time"] = start.expected;
      if (start.exact) payload["expected_time_exact"] = to_string(*start.exact);
      payload["mode"] = rational ? "rational" : "float";
      payload["states"] = sol.values.size();
      break;
    }
    case EngineKind::finite_formula: {
      payload["expected_time"] = tokens == 1 ? 0.0 : expected_time_finite(config, spec.params.r);
      break;
    }
    case EngineKind::continuous_formula: {
      SeriesControl control;
      control.tolerance = spec.tolerance;
      const auto est = tokens == 1 ? ContinuousEstimate{0.0, 0.0, r_in_continuous_range(spec.params.r)}
                                   : expected_time_continuous(config, spec.params.r, control);
      payload["expected_time"] = est.value;
      payload["error_bound"] = est.error_bound;
      payload["r_in_range"] = est.r_in_range;
      break;
    }
    case EngineKind::bounds: {
      payload["worst_case_bound"] = worst_case_bound(n, d);
      if (tokens >= 3) {
        payload["stage_bound_tau"] = stage_bound_tau(n, tokens, d);
        payload["cumulative_stage_bound"] = cumulative_stage_bound(n, tokens, d);
        payload["cumulative_square_bound"] = cumulative_square_bound(n, tokens, d);
      }
      if (tokens == 3) {
        const auto g = config.gaps();
        const Rational rate = parse_rational(spec.rate_text);
        const Rational diffusion = spec.params.is_sync() ? Rational(rate * (1 - rate)) : rate;
        const Rational exact = triangle_formula(Rational(g[0]), Rational(g[1]), Rational(g[2]), diffusion);
        payload["triangle_formula"] = to_double(exact);
        payload["triangle_formula_exact"] = to_string(exact);
      }
      if (tokens == n) {
        const auto fb = full_config_bounds(n, d);
        payload["full_mean_bound"] = fb.mean_bound;
        payload["full_median_threshold"] = fb.median_threshold;
      }
      break;
    }
  }
  return payload;
}

std::vector<json> run_specs(const std::vector<ExperimentSpec>& specs, const RunSettings& settings) {
  for (const auto& s : specs) validate_spec(s);

  struct Job {
    const ExperimentSpec* spec;
    int n;
    std::size_t index;
    RingConfig config;
  };
  std::vector<Job> jobs;
  for (const auto& s : specs) {
    auto sizes = s.n_list;
    std::stable_sort(sizes.begin(), sizes.end());
    for (int n : sizes) {
      try {
        auto configs = spec_configs(s, n);
        for (std::size_t i = 0; i < configs.size(); ++i) jobs.push_back({&s, n, i, std::move(configs[i])});
      } catch (...) {
        rethrow_in_context("spec line " + std::to_string(s.line) + " (n=" + std::to_string(n) + "): ");
      }
    }
  }
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return std::tie(a.spec->line, a.n, a.index) < std::tie(b.spec->line, b.n, b.index);
  });

  const unsigned pool = resolve_threads(settings.threads);
  const auto outer = static_cast<unsigned>(std::min<std::size_t>(pool, std::max<std::size_t>(1, jobs.size())));
  const unsigned inner = std::max(1U, pool / outer);

  std::vector<json> records(jobs.size());
  parallel_for(jobs.size(), outer, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto started = std::chrono::steady_clock::now();
    json record;
    record["line"] = job.spec->line;
    record["spec"] = job.spec->text;
    record["n"] = job.n;
    record["config_index"] = job.index;
    record["config"] = job.config.literal();
    record["engine"] = engine_name(job.spec->engine);
    record["kind"] = "result";
    try {
      record["payload"] = run_engine(*job.spec, job.config, inner);
    } catch (...) {
      rethrow_in_context("spec line " + std::to_string(job.spec->line) + " (n=" + std::to_string(job.n) + "): ");
    }
    finalize_record(record, seconds_since(started));
    records[i] = std::move(record);
  });
  return records;
}

std::string payload_hash(const json& record) {
  json copy = record;
  copy.erase("wall_time");
  copy.erase("timestamp");
  copy.erase("payload_hash");
  const std::string text = copy.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void finalize_record(json& record, double wall_time) {
  record["tool_version"] = kToolVersion;
  record["payload_hash"] = payload_hash(record);
  record["wall_time"] = wall_time;
  record["timestamp"] = utc_timestamp();
}

void append_records(const std::string& path, const std::vector<json>& records, const json& manifest_extra) {
  {
    std::ofstream out(path, std::ios::app);
    if (!out) throw InvalidInput("cannot open output file " + path);
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw EngineError("failed writing " + path);
  }
  json manifest;
  manifest["records"] = path;
  manifest["tool_version"] = kToolVersion;
  manifest["host"] = host_name();
  manifest["written"] = utc_timestamp();
  manifest["appended_records"] = records.size();
  auto hashes = json::array();
  for (const auto& r : records) hashes.push_back(r.value("payload_hash", ""));
  manifest["payload_hashes"] = hashes;
  manifest.update(manifest_extra);
  std::ofstream side(path + ".manifest.json", std::ios::trunc);
  if (!side) throw InvalidInput("cannot write manifest for " + path);
  side << manifest.dump(2) << '\n';
}

std::vector<json> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open record file " + path);
  std::vector<json> out;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(text));
    } catch (const json::parse_error&) {
      throw SchemaError("record file " + path + " line " + std::to_string(line) + " is not valid JSON");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Studies

double r_squared(std::span<const double> x, std::span<const double> y) {
  const auto k = static_cast<double>(x.size());
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("r_squared needs two equal-length series");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (syy == 0.0) return 1.0;  // constant data is fitted exactly
  if (sxx == 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

namespace {

ScalingPoint monte_carlo_point(const std::vector<RingConfig>& configs, const ProtocolParams& params,
                               std::size_t trials, std::uint64_t seed, unsigned threads) {
  const int n = configs.front().size();
  double mean = 0.0;
  double var = 0.0;
  for (std::size_t s = 0; s < configs.size(); ++s) {
    MonteCarloOptions opts;
    opts.trials = trials;
    opts.base_seed = derived_seed(seed, static_cast<std::uint64_t>(n), s);
    opts.threads = threads;
    const auto summary = monte_carlo(configs[s], params, opts);
    if (summary.censored > 0) {
      throw ResourceError("study aborted: " + std::to_string(summary.censored) + " censored trials at n=" +
                          std::to_string(n) + " for " + configs[s].literal());
    }
    mean += summary.mean;
    var += summary.std_error * summary.std_error;
  }
  const auto count = static_cast<double>(configs.size());
  mean /= count;
  const double se = std::sqrt(var) / count;
  return {n, mean, mean - 1.96 * se, mean + 1.96 * se, worst_case_bound(n, params.diffusion())};
}

}  // namespace

FlipScalingReport study_flip_scaling(const FlipScalingOptions& o) {
  auto sizes = o.n_list;
  std::sort(sizes.begin(), sizes.end());
  if (sizes.size() < 3) throw InvalidInput("flip scaling needs at least three ring sizes");
  if (sizes.back() < 4 * sizes.front()) throw InvalidInput("ring sizes must span at least a factor of 4");
  for (int n : sizes) {
    if (n < 3 || n % 2 == 0) throw InvalidInput("ring size must be odd and at least 3");
  }
  if (o.m < 0 || o.samples < 1) throw InvalidInput("flip scaling needs m >= 0 and samples >= 1");
  const unsigned threads = resolve_threads(o.threads);

  FlipScalingReport report;
  report.m = o.m;
  report.params = o.params;
  std::vector<double> xs;
  std::vector<double> x2s;
  std::vector<double> ys;
  for (int n : sizes) {
    std::vector<RingConfig> configs;
    for (int s = 0; s < o.samples; ++s) {
      configs.push_back(gen_flip_m(n, o.m, derived_seed(o.seed, static_cast<std::uint64_t>(n), s)));
    }
    report.flip.push_back(monte_carlo_point(configs, o.params, o.trials, o.seed, threads));
    report.control.push_back(
        monte_carlo_point({gen_equilateral(n)}, o.params, o.control_trials, o.seed ^ 0xc0417011ULL, threads));
    xs.push_back(n);
    x2s.push_back(static_cast<double>(n) * n);
    ys.push_back(report.flip.back().mean);
  }
  report.r2_linear = r_squared(xs, ys);
  report.r2_quadratic = r_squared(x2s, ys);
  double lo = INFINITY;
  double hi = 0.0;
  for (const auto& p : report.flip) {
    lo = std::min(lo, p.mean / p.n);
    hi = std::max(hi, p.mean / p.n);
  }
  report.ratio_spread = hi == 0.0 ? 1.0 : hi / lo;
  const auto& first = report.control.front();
  const auto& last = report.control.back();
  report.control_growth = (last.mean / last.n) / (first.mean / first.n);
  return report;
}

FullStudyReport study_full(const FullStudyOptions& o) {
  if (o.n < 3 || o.n % 2 == 0) throw InvalidInput("ring size must be odd and at least 3");
  if (o.curve_points < 2) throw InvalidInput("curve needs at least two points");
  const unsigned threads = resolve_threads(o.threads);
  const double d = o.params.diffusion();
  const double nn = o.n;

  FullStudyReport report;
  report.n = o.n;
  report.params = o.params;
  const auto bounds = full_config_bounds(o.n, d);
  report.mean_bound = bounds.mean_bound;
  report.median_threshold = bounds.median_threshold;
  report.equilateral_time = nn * nn / (27.0 * d);

  const auto config = gen_full(o.n);
  MonteCarloOptions opts;
  opts.trials = o.trials;
  opts.base_seed = o.seed;
  opts.threads = threads;
  opts.thresholds = {bounds.median_threshold};
  opts.quantiles = {0.5, 0.9, 0.99};
  const auto summary = monte_carlo(config, o.params, opts);
  if (summary.censored > 0) throw ResourceError("full-configuration study hit the time limit");
  report.summary = to_json(summary);
  report.mean = summary.mean;
  report.ci_lo = summary.ci95.lo;
  report.ci_hi = summary.ci95.hi;
  report.tail_probability = summary.tail_probs.front().probability;
  report.tail_wilson_hi = summary.tail_probs.front().wilson95.hi;

  // sigma^2 t from 0.0025 to 0.1 on a geometric grid.
  const double sigma2 = d / (nn * nn);
  std::vector<double> times;
  for (int k = 0; k < o.curve_points; ++k) {
    const double x = 0.0025 * std::pow(40.0, static_cast<double>(k) / (o.curve_points - 1));
    times.push_back(o.params.is_sync() ? std::round(x / sigma2) : x / sigma2);
  }
  const auto s_emp = token_count_curve(config, o.params, o.curve_trials, times, o.seed + 1, threads);
  for (std::size_t k = 0; k < times.size(); ++k) {
    report.curve.push_back({times[k], s_emp[k], full_token_expectation_S_tilde(sigma2, times[k]),
                            full_token_expectation_S(o.n, d, times[k])});
  }
  return report;
}

ConjectureReport study_conjecture_scan(const ConjectureOptions& o) {
  if (o.n < 3 || o.n % 2 == 0) throw InvalidInput("ring size must be odd and at least 3");
  if (o.sample_tokens < 3 || o.sample_tokens % 2 == 0 || o.sample_tokens > o.n) {
    throw InvalidInput("sampled token count must be odd, at least 3 and at most n");
  }
  SolverOptions solver;
  solver.max_states = o.budget_states;
  const bool sync = o.params.is_sync();
  const double rate_d = sync ? o.params.r : o.params.lambda;
  auto solve = [&](const RingConfig& c) {
    if (o.mode == ArithmeticMode::rational) {
      const Rational rate = parse_rational(o.rate_text);
      return sync ? exact_sync(c, rate, solver) : exact_async(c, rate, solver);
    }
    return sync ? exact_sync(c, rate_d, solver) : exact_async(c, rate_d, solver);
  };

  ConjectureReport report;
  report.n = o.n;
  report.params = o.params;
  report.sample_tokens = o.sample_tokens;

  // Every 3-token configuration up to rotation: a token at position 1.
  std::vector<ExactSolution> solved;
  bool have_max = false;
  for (int p = 2; p <= o.n; ++p) {
    for (int q = p + 1; q <= o.n; ++q) {
      const std::vector<int> pos = {1, p, q};
      const auto c = RingConfig::from_tokens(o.n, pos);
      const ExactSolution* hit = nullptr;
      for (const auto& s : solved) {
        if (s.contains(c)) hit = &s;
      }
      if (!hit) {
        solved.push_back(solve(c));
        hit = &solved.back();
      }
      const double value = hit->at(c);
      ++report.three_token_configs;
      if (!have_max || value > report.max_three * (1.0 + 1e-12)) {
        have_max = true;
        report.max_three = value;
        report.argmax_gaps = c.gaps().values();
      }
    }
  }
  const auto [gmin, gmax] = std::minmax_element(report.argmax_gaps.begin(), report.argmax_gaps.end());
  report.max_near_equilateral = *gmax - *gmin <= 1;

  std::set<std::vector<int>> distinct;
  std::size_t exact_count = 0;
  const unsigned threads = resolve_threads(o.threads);
  for (int s = 0; s < o.sample_size; ++s) {
    const auto c = gen_random_tokens(o.n, o.sample_tokens, derived_seed(o.seed, static_cast<std::uint64_t>(o.n), s));
    distinct.insert(c.token_positions());
    ConjectureSample sample{c, 0.0, 0.0, true};
    try {
      const double value = solve(c).at(c);
      sample.expected = value;
      sample.ci_hi = value;
      ++exact_count;
    } catch (const ResourceError&) {
      MonteCarloOptions opts;
      opts.trials = o.mc_trials;
      opts.base_seed = derived_seed(o.seed ^ 0x5a3b1eULL, static_cast<std::uint64_t>(o.n), s);
      opts.threads = threads;
      const auto summary = monte_carlo(c, o.params, opts);
      sample.exact = false;
      sample.expected = summary.mean;
      sample.ci_hi = summary.ci95.hi;
    }
    report.sample_max = std::max(report.sample_max, sample.expected);
    if (sample.expected > report.max_three * (1.0 + 1e-12)) report.samples_below_max = false;
    report.samples.push_back(std::move(sample));
  }

  double total = 1.0;  // C(n, M) token placements
  for (int i = 0; i < o.sample_tokens; ++i) total = total * (o.n - i) / (i + 1);
  std::ostringstream cov;
  cov << "sampled " << distinct.size() << " distinct of " << std::llround(total) << ' ' << o.sample_tokens
      << "-token configurations (" << std::setprecision(3) << 100.0 * static_cast<double>(distinct.size()) / total
      << "%), " << exact_count << " solved exactly and " << (o.sample_size - static_cast<int>(exact_count))
      << " by Monte Carlo; configurations outside the sample were not examined, so a larger value elsewhere "
         "is not ruled out";
  report.coverage = cov.str();
  return report;
}

namespace {

json point_json(const ScalingPoint& p) {
  return {{"n", p.n}, {"mean", p.mean}, {"ci_lo", p.ci_lo}, {"ci_hi", p.ci_hi}, {"bound", p.bound}};
}

json study_record(std::string_view study, std::string_view kind, json payload) {
  json r;
  r["study"] = study;
  r["kind"] = kind;
  r["payload"] = std::move(payload);
  finalize_record(r, 0.0);
  return r;
}

}  // namespace

json to_json(const FlipScalingReport& report) {
  json j;
  j["m"] = report.m;
  j["params"] = params_json(report.params);
  j["flip"] = json::array();
  for (const auto& p : report.flip) j["flip"].push_back(point_json(p));
  j["control"] = json::array();
  for (const auto& p : report.control) j["control"].push_back(point_json(p));
  j["r2_linear"] = report.r2_linear;
  j["r2_quadratic"] = report.r2_quadratic;
  j["ratio_spread"] = report.ratio_spread;
  j["control_growth"] = report.control_growth;
  return j;
}

json to_json(const FullStudyReport& report) {
  json j;
  j["n"] = report.n;
  j["params"] = params_json(report.params);
  j["estimate"] = report.summary;
  j["mean_bound"] = report.mean_bound;
  j["median_threshold"] = report.median_threshold;
  j["tail_probability"] = report.tail_probability;
  j["tail_wilson_hi"] = report.tail_wilson_hi;
  j["equilateral_time"] = report.equilateral_time;
  j["worst_case_bound"] = worst_case_bound(report.n, report.params.diffusion());
  j["bound_violation"] = report.ci_lo > j["worst_case_bound"].get<double>();
  j["mean_bound_exceeded"] = report.ci_hi > report.mean_bound;
  return j;
}

json to_json(const ConjectureReport& report) {
  json j;
  j["n"] = report.n;
  j["params"] = params_json(report.params);
  j["three_token_configs"] = report.three_token_configs;
  j["max_three"] = report.max_three;
  j["argmax_gaps"] = report.argmax_gaps;
  j["max_near_equilateral"] = report.max_near_equilateral;
  j["sample_tokens"] = report.sample_tokens;
  j["sample_max"] = report.sample_max;
  j["samples_below_max"] = report.samples_below_max;
  j["coverage"] = report.coverage;
  j["samples"] = json::array();
  for (const auto& s : report.samples) {
    j["samples"].push_back(
        {{"config", s.config.literal()}, {"expected", s.expected}, {"ci_hi", s.ci_hi}, {"exact", s.exact}});
  }
  return j;
}

std::vector<json> study_records(const FlipScalingReport& report) {
  std::vector<json> out;
  for (const auto& p : report.flip) out.push_back(study_record("flip_scaling", "scaling_point", point_json(p)));
  for (const auto& p : report.control) out.push_back(study_record("flip_scaling", "control_point", point_json(p)));
  out.push_back(study_record("flip_scaling", "flip_summary", to_json(report)));
  return out;
}

std::vector<json> study_records(const FullStudyReport& report) {
  std::vector<json> out;
  out.push_back(study_record("full", "full_summary", to_json(report)));
  json curve = json::array();
  for (const auto& p : report.curve) {
    curve.push_back({{"t", p.t}, {"S_emp", p.s_emp}, {"S_tilde", p.s_tilde}, {"S_finite", p.s_finite}});
  }
  out.push_back(study_record("full", "token_curve", {{"n", report.n}, {"curve", curve}}));
  return out;
}

std::vector<json> study_records(const ConjectureReport& report) {
  return {study_record("conjecture", "conjecture_report", to_json(report))};
}

void emit_plot_data(const std::string& record_path, std::string_view kind, std::ostream& out) {
  const auto records = read_records(record_path);
  if (records.empty()) throw SchemaError("record file " + record_path + " is empty");
  auto field = [](const json& obj, const std::string& name, const std::string& where) -> const json& {
    if (!obj.is_object() || !obj.contains(name)) throw SchemaError("missing field '" + name + "' in " + where);
    return obj.at(name);
  };
  auto number = [&](const json& obj, const std::string& name, const std::string& where) {
    const auto& v = field(obj, name, where);
    if (!v.is_number()) throw SchemaError("field '" + name + "' in " + where + " is not a number");
    return v.get<double>();
  };
  out << std::setprecision(17);
  std::size_t rows = 0;
  if (kind == "scaling") {
    std::vector<std::array<double, 5>> table;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::string where = "record " + std::to_string(i + 1);
      if (field(records[i], "kind", where) != "scaling_point") continue;
      const auto& p = field(records[i], "payload", where);
      const std::string at = where + " payload";
      table.push_back({number(p, "n", at), number(p, "mean", at), number(p, "ci_lo", at), number(p, "ci_hi", at),
                       number(p, "bound", at)});
    }
    std::stable_sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
    out << "n,mean,ci_lo,ci_hi,bound\n";
    for (const auto& row : table) {
      out << static_cast<long>(row[0]) << ',' << row[1] << ',' << row[2] << ',' << row[3] << ',' << row[4] << '\n';
    }
    rows = table.size();
  } else if (kind == "curve") {
    out << "t,S_emp,S_tilde\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::string where = "record " + std::to_string(i + 1);
      if (field(records[i], "kind", where) != "token_curve") continue;
      const auto& curve = field(field(records[i], "payload", where), "curve", where + " payload");
      if (!curve.is_array()) throw SchemaError("field 'curve' in " + where + " is not an array");
      for (std::size_t k = 0; k < curve.size(); ++k) {
        const std::string at = where + " curve point " + std::to_string(k + 1);
        out << number(curve[k], "t", at) << ',' << number(curve[k], "S_emp", at) << ','
            << number(curve[k], "S_tilde", at) << '\n';
        ++rows;
      }
    }
  } else {
    throw InvalidInput("plot kind must be scaling or curve");
  }
  if (rows == 0) {
    throw SchemaError("no records with kind '" + std::string(kind == "scaling" ? "scaling_point" : "token_curve") +
                      "' in " + record_path);
  }
}

}  // namespace herman
