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
#include <vector>

#include "herman/rational.hpp"
#include "herman/ring_core.hpp"

namespace herman {

struct TokenPair {
  int u = 0;  ///< 1-based token label, u < v
  int v = 0;
};

/// Partition of tokens 1..M into m pairs and one leftover token. The sign is
/// the parity of the permutation (u1 v1 ... um vm w0); pairs are kept sorted
/// by u, which does not affect the sign.
struct Pairing {
  std::vector<TokenPair> pairs;
  int leftover = 0;
  int sign = 1;
};

/// A pairing with a collision side per pair. directed_sign is the base sign
/// times (-1)^(number of up pairs).
struct DirectedPairing {
  std::size_t base_index = 0;  ///< into enumerate_pairings(M)
  std::vector<TokenPair> pairs;
  std::vector<Direction> directions;
  int directed_sign = 1;
};

/// +1 for even, -1 for odd permutations of 1..k.
int permutation_sign(std::span<const int> permutation);

/// All M!/(2^m m!) pairings of odd M >= 3, in a fixed order.
std::vector<Pairing> enumerate_pairings(int tokens);
/// All directed pairings; 2^m per pairing, bit i of the index set means pair i is up.
std::vector<DirectedPairing> enumerate_directed_pairings(int tokens);

/// Gambler's ruin exit probabilities: down 1 - z/N, up z/N.
Rational absorption_prob(int z, int n, Direction d);
double absorption_prob_double(int z, int n, Direction d);

/// g(j, y; u) = sin(j pi y) sin(j pi u) / (1 - cos(j pi u)).
double g_term(int j, double y, double u);
/// h(j; u) = 1 - 2 r(1-r) (1 - cos(j pi u)).
double h_term(int j, double u, double r);

/// P(T_uv > t and the pair collides on side d), where z_directed is z_uv for
/// down and N - z_uv for up. Synchronous protocol.
double pair_survival(int z_directed, int n, double r, long t);

/// P(T <= t) from the signed pairing sum. Throws EngineError if the raw sum
/// leaves [0, 1] by more than 1e-9; the value is not clamped.
double balding_cdf(const RingConfig& c, double r, long t);

/// Sum over directed pairings of sign * P(all pairs collide on their sides),
/// in exact arithmetic. Equals 1 for every configuration with M >= 3.
Rational signed_absorption_mass(const RingConfig& c);

/// One (directed pairing, subset) term of the expectation sums.
struct TermRecord {
  std::size_t pairing_id = 0;
  unsigned subset_mask = 0;
  int sign = 1;
  double f_value = 0.0;
  double g_value = 0.0;
  double contribution = 0.0;
};

struct FiniteOptions {
  /// Refuse when (N-1)^m * M!/m! exceeds this.
  double max_terms = 4.0e7;
};

/// Exact finite-N expression for E[T] in the synchronous protocol.
double expected_time_finite(const RingConfig& c, double r, const FiniteOptions& options = {},
                            std::vector<TermRecord>* dump = nullptr);

/// F^(N)_k evaluated at y_i = z_i / N.
double finite_f(std::span<const int> z, int n, double r);

enum class SeriesMode { finite_n, continuous };

struct SeriesControl {
  SeriesMode mode = SeriesMode::continuous;
  long truncation_cap = 20'000;  ///< largest index per coordinate
  double tolerance = 1e-9;       ///< absolute truncation error per F~ evaluation
  double max_terms = 5.0e8;      ///< cap^k ceiling
};

struct SeriesValue {
  double value = 0.0;
  double error_bound = 0.0;  ///< majorant of the neglected tail
  long cap = 0;
};

/// Upper bound on the sum of 1/(j1...jk (j1^2+...+jk^2)) over all
/// j in N+^k outside {1..cap}^k.
double f_tilde_tail_majorant(int k, long cap);

/// N-free limit function F~_k, truncated to {1..cap}^k with the smallest cap
/// whose tail majorant meets the tolerance.
SeriesValue f_tilde(std::span<const double> y, const SeriesControl& control = {});

struct ContinuousEstimate {
  double value = 0.0;
  double error_bound = 0.0;  ///< accumulated truncation bound on the value
  bool r_in_range = true;    ///< r inside the interval where the O(N^eps) error bound holds
};

/// N^2/(r(1-r)) times the directed pairing sum with F^(N) replaced by F~.
ContinuousEstimate expected_time_continuous(const RingConfig& c, double r, const SeriesControl& control = {});

/// The interval (1/2 - 27^(1/4)/6, 1/2 + 27^(1/4)/6).
bool r_in_continuous_range(double r);

struct BaldingMcResult {
  double estimate = 0.0;
  double std_error = 0.0;
  double signed_mass = 0.0;  ///< sum of sign * P(A_w); should be 1
  std::size_t rejected = 0;
};

/// Monte Carlo estimate of E[T] through the directed pairing identity: for
/// each directed pairing, the pairs are simulated as independent two-token
/// walks conditioned (by rejection) on their collision sides.
BaldingMcResult balding_expectation_mc(const RingConfig& c, const ProtocolParams& params,
                                       std::size_t trials, std::uint64_t seed);

/// CSV rows (pairing_id, subset_mask, sign, F_value, G_value, contribution).
void write_term_csv(std::ostream& os, std::span<const TermRecord> terms);

}  // namespace herman
