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

#include "herman/dynamics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <string>
#include <thread>

#include "herman/compensated_sum.hpp"
#include "herman/error.hpp"
#include "herman/parallel.hpp"

namespace herman {

namespace {

int wrap(int n, int position) { return position > n ? position - n : position; }

void check_parity_step(std::size_t before, std::size_t after) {
  // Token count is odd, never grows, and drops by an even amount.
  assert(after % 2 == 1);
  assert(after <= before);
  assert((before - after) % 2 == 0);
  (void)before;
  (void)after;
}

}  // namespace

std::vector<int> apply_sync_moves(int n, std::span<const int> positions,
                                  std::span<const std::uint8_t> moves) {
  const std::size_t count = positions.size();
  std::vector<std::uint8_t> removed(count, 0);
  if (count > 1) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t prev = (i + count - 1) % count;
      if (!moves[i] && moves[prev] && clockwise_distance(n, positions[prev], positions[i]) == 1) {
        removed[i] = 1;
        removed[prev] = 1;
      }
    }
  }
  std::vector<int> next;
  next.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!removed[i]) next.push_back(wrap(n, positions[i] + (moves[i] ? 1 : 0)));
  }
  std::sort(next.begin(), next.end());
  check_parity_step(count, next.size());
  return next;
}

std::vector<int> apply_async_move(int n, std::span<const int> positions, std::size_t mover) {
  const std::size_t count = positions.size();
  std::vector<int> next;
  next.reserve(count);
  const std::size_t successor = (mover + 1) % count;
  const bool collides = count > 1 && clockwise_distance(n, positions[mover], positions[successor]) == 1;
  for (std::size_t i = 0; i < count; ++i) {
    if (i == mover) {
      if (!collides) next.push_back(wrap(n, positions[i] + 1));
    } else if (!(collides && i == successor)) {
      next.push_back(positions[i]);
    }
  }
  std::sort(next.begin(), next.end());
  check_parity_step(count, next.size());
  return next;
}

RingConfig sync_step(const RingConfig& c, double r, TrialRng& rng) {
  const int n = c.size();
  const auto& bits = c.bits();
  std::vector<std::uint8_t> next(bits);
  for (int i = 1; i <= n; ++i) {
    const int prev = i == 1 ? n : i - 1;
    if (bits[static_cast<std::size_t>(i - 1)] == bits[static_cast<std::size_t>(prev - 1)] && rng.bernoulli(r)) {
      next[static_cast<std::size_t>(i - 1)] ^= 1U;
    }
  }
  return RingConfig::from_bits(n, next);
}

std::vector<int> sync_step_tokens(int n, std::span<const int> positions, double r, TrialRng& rng) {
  std::vector<std::uint8_t> moves(positions.size());
  for (auto& mv : moves) mv = rng.bernoulli(r) ? 1 : 0;
  return apply_sync_moves(n, positions, moves);
}

TrialOutcome sync_run(const RingConfig& c, double r, TrialRng& rng, const RunOptions& options) {
  TrialOutcome out;
  std::vector<int> tokens = c.token_positions();
  const int n = c.size();
  const double limit = options.time_limit.value_or(default_time_limit(n, ProtocolParams::sync(r)));
  if (options.record_trace) out.trace.push_back({0.0, static_cast<int>(tokens.size())});

  std::vector<std::uint8_t> moves;
  std::vector<int> next;
  std::uint64_t steps = 0;
  while (tokens.size() > 1) {
    if (static_cast<double>(steps) >= limit) {
      out.censored = true;
      break;
    }
    moves.resize(tokens.size());
    for (auto& mv : moves) mv = rng.bernoulli(r) ? 1 : 0;
    next = apply_sync_moves(n, tokens, moves);
    ++steps;
    if (options.record_trace && next.size() != tokens.size()) {
      out.trace.push_back({static_cast<double>(steps), static_cast<int>(next.size())});
    }
    tokens.swap(next);
  }
  out.stabilization_time = static_cast<double>(steps);
  out.final_token_count = static_cast<int>(tokens.size());
  return out;
}

TrialOutcome async_run(const RingConfig& c, double lambda, TrialRng& rng, const RunOptions& options) {
  TrialOutcome out;
  std::vector<int> tokens = c.token_positions();
  const int n = c.size();
  const double limit = options.time_limit.value_or(default_time_limit(n, ProtocolParams::async(lambda)));
  if (options.record_trace) out.trace.push_back({0.0, static_cast<int>(tokens.size())});

  double now = 0.0;
  while (tokens.size() > 1) {
    const double next_time = now + rng.exponential(static_cast<double>(tokens.size()) * lambda);
    if (next_time > limit) {
      now = limit;
      out.censored = true;
      break;
    }
    now = next_time;
    const auto mover = static_cast<std::size_t>(rng.below(tokens.size()));
    auto next = apply_async_move(n, tokens, mover);
    if (options.record_trace && next.size() != tokens.size()) {
      out.trace.push_back({now, static_cast<int>(next.size())});
    }
    tokens.swap(next);
  }
  out.stabilization_time = now;
  out.final_token_count = static_cast<int>(tokens.size());
  return out;
}

TrialOutcome run_trial(const RingConfig& c, const ProtocolParams& params, TrialRng& rng,
                       const RunOptions& options) {
  return params.is_sync() ? sync_run(c, params.r, rng, options)
                          : async_run(c, params.lambda, rng, options);
}

double default_time_limit(int n, const ProtocolParams& params) {
  const double nn = static_cast<double>(n);
  return 50.0 * nn * nn / params.diffusion();
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("HERMAN_KIT_THREADS")) {
    const int value = std::atoi(env);
    if (value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

EstimateSummary summarize(std::span<const TrialOutcome> outcomes, std::span<const double> thresholds,
                          std::span<const double> quantiles) {
  EstimateSummary s;
  s.trials = outcomes.size();
  std::vector<double> times;
  times.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (o.censored) {
      ++s.censored;
    } else {
      times.push_back(o.stabilization_time);
    }
  }
  s.valid = s.censored == 0 && !times.empty();
  const auto completed = times.size();
  if (completed == 0) return s;

  CompensatedSum sum;
  for (double t : times) sum += t;
  s.mean = sum.value() / static_cast<double>(completed);
  CompensatedSum sq;
  for (double t : times) sq += (t - s.mean) * (t - s.mean);
  s.variance = completed > 1 ? sq.value() / static_cast<double>(completed - 1) : 0.0;
  s.std_error = std::sqrt(s.variance / static_cast<double>(completed));
  s.ci95 = {s.mean - 1.96 * s.std_error, s.mean + 1.96 * s.std_error};

  for (double t0 : thresholds) {
    TailProbability tail;
    tail.threshold = t0;
    tail.count = static_cast<std::size_t>(std::count_if(times.begin(), times.end(), [t0](double t) { return t >= t0; }));
    tail.probability = static_cast<double>(tail.count) / static_cast<double>(completed);
    tail.wilson95 = wilson_interval(tail.count, completed);
    s.tail_probs.push_back(tail);
  }

  if (!quantiles.empty()) {
    std::vector<double> sorted(times);
    std::sort(sorted.begin(), sorted.end());
    // Linear interpolation between order statistics (Hyndman-Fan type 7).
    for (double level : quantiles) {
      const double h = (static_cast<double>(completed) - 1.0) * std::clamp(level, 0.0, 1.0);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const auto hi = std::min(lo + 1, completed - 1);
      const double value = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
      s.quantiles.push_back({level, value});
    }
  }
  return s;
}

EstimateSummary monte_carlo(const RingConfig& c, const ProtocolParams& params,
                            const MonteCarloOptions& options) {
  if (options.trials == 0) throw InvalidInput("monte_carlo needs at least one trial");
  std::vector<TrialOutcome> outcomes(options.trials);
  RunOptions run;
  run.time_limit = options.time_limit;
  const unsigned threads = options.threads ? options.threads : default_thread_count();
  parallel_for(options.trials, threads, [&](std::size_t i) {
    TrialRng rng(options.base_seed, i);
    outcomes[i] = run_trial(c, params, rng, run);
  });
  return summarize(outcomes, options.thresholds, options.quantiles);
}

std::vector<double> token_count_curve(const RingConfig& c, const ProtocolParams& params,
                                      std::size_t trials, std::span<const double> sample_times,
                                      std::uint64_t base_seed, unsigned threads) {
  if (trials == 0) throw InvalidInput("token_count_curve needs at least one trial");
  if (sample_times.empty()) return {};
  for (double t : sample_times) {
    if (t < 0.0) throw InvalidInput("sample times must be nonnegative");
    if (params.is_sync() && t != std::floor(t)) {
      throw InvalidInput("synchronous sample times must be integers");
    }
  }
  const double horizon = *std::max_element(sample_times.begin(), sample_times.end());
  RunOptions run;
  run.time_limit = horizon;
  run.record_trace = true;

  std::vector<std::vector<int>> counts(trials);
  parallel_for(trials, threads ? threads : default_thread_count(), [&](std::size_t i) {
    TrialRng rng(base_seed, i);
    const auto outcome = run_trial(c, params, rng, run);
    auto& row = counts[i];
    row.reserve(sample_times.size());
    for (double t : sample_times) {
      // Last trace point at or before t.
      auto it = std::upper_bound(outcome.trace.begin(), outcome.trace.end(), t,
                                 [](double value, const TracePoint& p) { return value < p.time; });
      row.push_back(std::prev(it)->token_count);
    }
  });

  std::vector<double> mean(sample_times.size(), 0.0);
  for (std::size_t k = 0; k < sample_times.size(); ++k) {
    CompensatedSum sum;
    for (const auto& row : counts) sum += row[k];
    mean[k] = sum.value() / static_cast<double>(trials);
  }
  return mean;
}

nlohmann::json to_json(const EstimateSummary& s) {
  nlohmann::json j;
  j["trials"] = s.trials;
  j["censored"] = s.censored;
  j["valid"] = s.valid;
  j["mean"] = s.mean;
  j["variance"] = s.variance;
  j["std_error"] = s.std_error;
  j["ci95"] = {s.ci95.lo, s.ci95.hi};
  auto q = nlohmann::json::array();
  for (const auto& v : s.quantiles) q.push_back({{"level", v.level}, {"value", v.value}});
  j["quantiles"] = q;
  auto tails = nlohmann::json::array();
  for (const auto& t : s.tail_probs) {
    tails.push_back({{"threshold", t.threshold},
                     {"count", t.count},
                     {"probability", t.probability},
                     {"wilson95", {t.wilson95.lo, t.wilson95.hi}}});
  }
  j["tail_probs"] = tails;
  return j;
}

void write_trace_csv(std::ostream& os, std::span<const TrialOutcome> outcomes) {
  os << "trial,time,token_count\n";
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (const auto& p : outcomes[i].trace) os << i << ',' << p.time << ',' << p.token_count << '\n';
  }
}

}  // namespace herman
