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
#include <optional>
#include <span>
#include <vector>

#include "herman/ring_core.hpp"
#include "herman/rng.hpp"
#include "json.hpp"

namespace herman {

struct TracePoint {
  double time = 0.0;
  int token_count = 0;
};

/// One run of the protocol until a single token is left (or the time limit).
struct TrialOutcome {
  double stabilization_time = 0.0;  ///< steps (sync) or elapsed time (async)
  bool censored = false;            ///< hit the time limit with M > 1
  int final_token_count = 1;
  std::vector<TracePoint> trace;    ///< (time, M) at start and at every annihilation
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct QuantileValue {
  double level = 0.0;
  double value = 0.0;
};

struct TailProbability {
  double threshold = 0.0;
  std::size_t count = 0;     ///< trials with T >= threshold
  double probability = 0.0;  ///< count / completed trials
  Interval wilson95;
};

/// Monte Carlo summary. When censored > 0 the statistics cover only the
/// completed trials and `valid` is false.
struct EstimateSummary {
  std::size_t trials = 0;
  std::size_t censored = 0;
  bool valid = true;
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  Interval ci95;
  std::vector<QuantileValue> quantiles;
  std::vector<TailProbability> tail_probs;
};

struct RunOptions {
  std::optional<double> time_limit;
  bool record_trace = false;
};

struct MonteCarloOptions {
  std::size_t trials = 1000;
  std::uint64_t base_seed = 1;
  std::vector<double> thresholds;
  std::vector<double> quantiles;
  unsigned threads = 0;  ///< 0: default_thread_count()
  std::optional<double> time_limit;  ///< default: default_time_limit()
};

// Token-level primitives shared by the simulators and the exact solver.
// Positions are sorted 1-based token positions.

/// Successor token set when token i passes iff moves[i] != 0. A token that
/// stays while its counterclockwise neighbour passes onto it annihilates with
/// it; a token that passes while receiving one keeps the received token.
std::vector<int> apply_sync_moves(int n, std::span<const int> positions,
                                  std::span<const std::uint8_t> moves);

/// Successor token set when only token `mover` passes.
std::vector<int> apply_async_move(int n, std::span<const int> positions, std::size_t mover);

/// One synchronous round on the bit array. Every processor reads the previous
/// state; each token holder flips its bit with probability r. One uniform is
/// drawn per token holder, in increasing position order.
RingConfig sync_step(const RingConfig& c, double r, TrialRng& rng);

/// Token-passing formulation of sync_step consuming the same draws.
std::vector<int> sync_step_tokens(int n, std::span<const int> positions, double r, TrialRng& rng);

TrialOutcome sync_run(const RingConfig& c, double r, TrialRng& rng, const RunOptions& options = {});
TrialOutcome async_run(const RingConfig& c, double lambda, TrialRng& rng,
                       const RunOptions& options = {});
TrialOutcome run_trial(const RingConfig& c, const ProtocolParams& params, TrialRng& rng,
                       const RunOptions& options = {});

/// 50 N^2 / D.
double default_time_limit(int n, const ProtocolParams& params);

/// HERMAN_KIT_THREADS if set, otherwise hardware concurrency.
unsigned default_thread_count();

/// Runs trials in parallel; trial i draws from TrialRng(base_seed, i). The
/// result does not depend on the thread count.
EstimateSummary monte_carlo(const RingConfig& c, const ProtocolParams& params,
                            const MonteCarloOptions& options);

/// Summary over per-trial outcomes, reduced in index order.
EstimateSummary summarize(std::span<const TrialOutcome> outcomes, std::span<const double> thresholds,
                          std::span<const double> quantiles);

/// Mean live-token count at each sample time (integers for sync).
std::vector<double> token_count_curve(const RingConfig& c, const ProtocolParams& params,
                                      std::size_t trials, std::span<const double> sample_times,
                                      std::uint64_t base_seed, unsigned threads = 0);

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

nlohmann::json to_json(const EstimateSummary& summary);

/// CSV rows (trial, time, token_count).
void write_trace_csv(std::ostream& os, std::span<const TrialOutcome> outcomes);

}  // namespace herman
