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
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "herman/rational.hpp"
#include "herman/ring_core.hpp"

namespace herman {

enum class ArithmeticMode { rational, float64 };

/// Hard ceiling on explored states regardless of the requested budget.
inline constexpr std::size_t kHardStateLimit = 250'000;

struct SolverOptions {
  /// Refuse to solve when more transient + absorbing states are reachable.
  std::size_t max_states = 5000;
  /// Identify configurations that differ by a rotation of the ring.
  bool rotation_reduction = false;
  /// States with fewer tokens than this are absorbing (value 0). The default
  /// absorbs at M = 1; absorb_below = M0 measures the time until the first
  /// annihilation from an M0-token configuration.
  int absorb_below = 2;
};

struct SolvedState {
  std::vector<int> tokens;
  int token_count = 0;
  double expected = 0.0;
  std::optional<Rational> exact;  ///< set in rational mode
};

/// Expected stabilization time of every configuration reachable from the
/// start. Keys are config literals ("N=9;tokens=1,4,7"); with rotation
/// reduction only one representative per rotation class is stored and
/// lookups canonicalize.
struct ExactSolution {
  ProtocolParams params;
  ArithmeticMode mode = ArithmeticMode::float64;
  std::string rate_text;  ///< r or lambda as given (exact in rational mode)
  int n = 0;
  bool rotation_reduced = false;
  int absorb_below = 2;
  std::string start_key;
  std::map<std::string, SolvedState> values;

  [[nodiscard]] std::string key_for(const RingConfig& c) const;
  [[nodiscard]] bool contains(const RingConfig& c) const;
  [[nodiscard]] const SolvedState& state(const RingConfig& c) const;
  [[nodiscard]] double at(const RingConfig& c) const { return state(c).expected; }
  /// Throws unless solved in rational mode.
  [[nodiscard]] const Rational& exact_at(const RingConfig& c) const;
  [[nodiscard]] const SolvedState& start() const { return values.at(start_key); }

  /// CSV rows (config_key, M, expected_time).
  void write_csv(std::ostream& os) const;
};

ExactSolution exact_sync(const RingConfig& start, const Rational& r, const SolverOptions& options = {});
ExactSolution exact_sync(const RingConfig& start, double r, const SolverOptions& options = {});
ExactSolution exact_async(const RingConfig& start, const Rational& lambda, const SolverOptions& options = {});
ExactSolution exact_async(const RingConfig& start, double lambda, const SolverOptions& options = {});

/// P(T <= t) for t = 0..t_max under the synchronous protocol.
std::vector<double> cdf_sync(const RingConfig& start, double r, int t_max,
                             const SolverOptions& options = {});

/// Lexicographically smallest rotation of a token set; starts at position 1.
std::vector<int> canonical_rotation(int n, std::span<const int> positions);

/// abc / (D (a+b+c)).
Rational triangle_formula(const Rational& a, const Rational& b, const Rational& c, const Rational& diffusion);
double triangle_formula(double a, double b, double c, double diffusion);

/// pi^2/8 - 29/27.
double worst_case_constant();
/// (pi^2/8 - 29/27) N^2 / D.
double worst_case_bound(int n, double diffusion);

/// floor(N/M)(floor(N/M)+1) / (2D): bound on the expected time for an
/// M-token configuration to lose a pair.
double stage_bound_tau(int n, int tokens, double diffusion);
/// Sum of stage_bound_tau over odd M' = 3..tokens.
double cumulative_stage_bound(int n, int tokens, double diffusion);
/// Sum of N^2/(M'^2 D) over odd M' = 3..tokens; tends to (pi^2/8 - 1) N^2/D.
double cumulative_square_bound(int n, int tokens, double diffusion);

/// Expected live-token count at time t for N tokens started equidistantly,
/// relative motion variance 2D/N^2 per time unit. S(0) = N.
double full_token_expectation_S(int n, double diffusion, double t);
/// N -> infinity limit 1 + 2 sum exp(-4 pi^2 j^2 sigma2 t), t > 0.
double full_token_expectation_S_tilde(double sigma2, double t);

struct FullConfigBounds {
  double mean_bound = 0.0;        ///< 0.0285 N^2 / D
  double median_threshold = 0.0;  ///< 0.02 N^2 / D
};
FullConfigBounds full_config_bounds(int n, double diffusion);

/// The integral bound t1 + sum_j exp(-4 pi^2 j^2 sigma2 t1)/(4 pi^2 j^2 sigma2)
/// with t1 = 1/(100 sigma2), in units of 1/sigma2. Stays below 0.0285.
double full_config_mean_constant();

}  // namespace herman
