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

#include "herman/pairing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include "herman/compensated_sum.hpp"
#include "herman/error.hpp"
#include "herman/rng.hpp"

namespace herman {

namespace {

constexpr double kPi = std::numbers::pi;

void require_pairable(int tokens) {
  if (tokens < 3 || tokens % 2 == 0) {
    throw InvalidInput("pairings need an odd token count M >= 3, got " + std::to_string(tokens));
  }
}

/// sin(pi * j * z / n) with the argument reduced exactly modulo 2n.
double sin_pi_ratio(long j, long z, long n) {
  const long reduced = (j * z) % (2 * n);
  return std::sin(kPi * static_cast<double>(reduced) / static_cast<double>(n));
}

double cos_pi_ratio(long j, long n) {
  const long reduced = j % (2 * n);
  return std::cos(kPi * static_cast<double>(reduced) / static_cast<double>(n));
}

struct DirectedDistances {
  std::vector<int> z;  // per pair, z_uv for down and N - z_uv for up
};

DirectedDistances directed_distances(const GapVector& gv, const DirectedPairing& dp) {
  DirectedDistances out;
  out.z.reserve(dp.pairs.size());
  for (std::size_t i = 0; i < dp.pairs.size(); ++i) {
    out.z.push_back(gv.directed_distance(dp.pairs[i].u, dp.pairs[i].v, dp.directions[i]));
  }
  return out;
}

struct TermValue {
  double value = 0.0;
  double error = 0.0;
};

/// Shared driver: sum over directed pairings w and nonempty subsets x of
/// sign(w) * F(y_F(x, w)) * G(y_G(x, w)). F is looked up by the sorted tuple
/// of directed distances of x and memoized.
double directed_subset_sum(const RingConfig& c, const std::function<TermValue(const std::vector<int>&)>& f,
                           std::vector<TermRecord>* dump, double* error_out) {
  const int tokens = c.token_count();
  require_pairable(tokens);
  const int n = c.size();
  const auto gv = c.gaps();
  const auto directed = enumerate_directed_pairings(tokens);
  const int m = (tokens - 1) / 2;

  std::map<std::vector<int>, TermValue> memo;
  CompensatedSum total;
  CompensatedSum error;
  std::vector<int> key;
  for (std::size_t id = 0; id < directed.size(); ++id) {
    const auto& dp = directed[id];
    const auto dist = directed_distances(gv, dp);
    for (unsigned mask = 1; mask < (1U << m); ++mask) {
      key.clear();
      double g_value = 1.0;  // empty product when x = w
      for (int i = 0; i < m; ++i) {
        const int z = dist.z[static_cast<std::size_t>(i)];
        if (mask & (1U << i)) {
          key.push_back(z);
        } else {
          g_value *= 1.0 - static_cast<double>(z) / n;
        }
      }
      std::sort(key.begin(), key.end());
      auto it = memo.find(key);
      if (it == memo.end()) it = memo.emplace(key, f(key)).first;
      const double contribution = dp.directed_sign * it->second.value * g_value;
      total += contribution;
      error += std::fabs(g_value) * it->second.error;
      if (dump) dump->push_back({id, mask, dp.directed_sign, it->second.value, g_value, contribution});
    }
  }
  if (error_out) *error_out = error.value();
  return total.value();
}

/// Truncated F~ sum over {1..cap}^k given per-coordinate tables s_i[j-1] = sin(y_i j pi) / j.
double f_tilde_core(const std::vector<std::vector<double>>& tables, long cap) {
  const auto k = tables.size();
  CompensatedSum sum;
  std::function<void(std::size_t, double, double)> recurse = [&](std::size_t dim, double prod, double squares) {
    const auto& table = tables[dim];
    if (dim + 1 == k) {
      for (long j = 1; j <= cap; ++j) {
        const double jj = static_cast<double>(j);
        sum += prod * table[static_cast<std::size_t>(j - 1)] / (squares + jj * jj);
      }
      return;
    }
    for (long j = 1; j <= cap; ++j) {
      const double s = table[static_cast<std::size_t>(j - 1)];
      if (s == 0.0) continue;
      const double jj = static_cast<double>(j);
      recurse(dim + 1, prod * s, squares + jj * jj);
    }
  };
  recurse(0, 1.0, 0.0);
  const double k_d = static_cast<double>(k);
  return -1.0 / (kPi * kPi) * std::pow(-2.0 / kPi, k_d) * sum.value();
}

double f_tilde_error(int k, long cap) {
  return 1.0 / (kPi * kPi) * std::pow(2.0 / kPi, k) * f_tilde_tail_majorant(k, cap);
}

long choose_cap(int k, const SeriesControl& control) {
  if (control.truncation_cap < 1) throw InvalidInput("truncation cap must be at least 1");
  if (!(control.tolerance > 0.0)) throw InvalidInput("series tolerance must be positive");
  if (f_tilde_error(k, control.truncation_cap) > control.tolerance) {
    throw ResourceError("F~ tail bound " + std::to_string(f_tilde_error(k, control.truncation_cap)) +
                        " at cap " + std::to_string(control.truncation_cap) + " exceeds tolerance " +
                        std::to_string(control.tolerance));
  }
  long lo = 0;  // fails (or unset)
  long hi = control.truncation_cap;
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (f_tilde_error(k, mid) <= control.tolerance) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (std::pow(static_cast<double>(hi), k) > control.max_terms) {
    throw ResourceError("F~ with k=" + std::to_string(k) + " needs cap " + std::to_string(hi) +
                        ", i.e. more than " + std::to_string(control.max_terms) + " terms");
  }
  return hi;
}

SeriesValue f_tilde_from_tables(std::vector<std::vector<double>>&& tables, int k, long cap) {
  SeriesValue out;
  out.cap = cap;
  out.error_bound = f_tilde_error(k, cap);
  out.value = f_tilde_core(tables, cap);
  return out;
}

}  // namespace

int permutation_sign(std::span<const int> permutation) {
  int inversions = 0;
  for (std::size_t i = 0; i < permutation.size(); ++i) {
    for (std::size_t j = i + 1; j < permutation.size(); ++j) {
      if (permutation[i] > permutation[j]) ++inversions;
    }
  }
  return inversions % 2 == 0 ? 1 : -1;
}

std::vector<Pairing> enumerate_pairings(int tokens) {
  require_pairable(tokens);
  std::vector<Pairing> out;
  std::vector<TokenPair> current;
  std::function<void(std::vector<int>&, int)> match = [&](std::vector<int>& rest, int leftover) {
    if (rest.empty()) {
      Pairing p;
      p.pairs = current;
      p.leftover = leftover;
      std::vector<int> perm;
      for (const auto& pr : p.pairs) {
        perm.push_back(pr.u);
        perm.push_back(pr.v);
      }
      perm.push_back(leftover);
      p.sign = permutation_sign(perm);
      out.push_back(std::move(p));
      return;
    }
    const int first = rest.front();
    for (std::size_t i = 1; i < rest.size(); ++i) {
      const int partner = rest[i];
      std::vector<int> remaining;
      for (std::size_t k = 1; k < rest.size(); ++k) {
        if (k != i) remaining.push_back(rest[k]);
      }
      current.push_back({first, partner});
      match(remaining, leftover);
      current.pop_back();
    }
  };
  for (int leftover = 1; leftover <= tokens; ++leftover) {
    std::vector<int> rest;
    for (int t = 1; t <= tokens; ++t) {
      if (t != leftover) rest.push_back(t);
    }
    match(rest, leftover);
  }
  return out;
}

std::vector<DirectedPairing> enumerate_directed_pairings(int tokens) {
  const auto base = enumerate_pairings(tokens);
  const int m = (tokens - 1) / 2;
  std::vector<DirectedPairing> out;
  out.reserve(base.size() << m);
  for (std::size_t b = 0; b < base.size(); ++b) {
    for (unsigned mask = 0; mask < (1U << m); ++mask) {
      DirectedPairing dp;
      dp.base_index = b;
      dp.pairs = base[b].pairs;
      int ups = 0;
      for (int i = 0; i < m; ++i) {
        const bool up = mask & (1U << i);
        dp.directions.push_back(up ? Direction::up : Direction::down);
        ups += up ? 1 : 0;
      }
      dp.directed_sign = base[b].sign * (ups % 2 == 0 ? 1 : -1);
      out.push_back(std::move(dp));
    }
  }
  return out;
}

Rational absorption_prob(int z, int n, Direction d) {
  if (z < 1 || z > n - 1) {
    throw InvalidInput("pair distance must lie in 1..N-1, got " + std::to_string(z));
  }
  Rational up(z, n);
  up.canonicalize();
  return d == Direction::up ? up : Rational(1 - up);
}

double absorption_prob_double(int z, int n, Direction d) {
  if (z < 1 || z > n - 1) {
    throw InvalidInput("pair distance must lie in 1..N-1, got " + std::to_string(z));
  }
  const double up = static_cast<double>(z) / n;
  return d == Direction::up ? up : 1.0 - up;
}

double g_term(int j, double y, double u) {
  return std::sin(j * kPi * y) * std::sin(j * kPi * u) / (1.0 - std::cos(j * kPi * u));
}

double h_term(int j, double u, double r) { return 1.0 - 2.0 * r * (1.0 - r) * (1.0 - std::cos(j * kPi * u)); }

double pair_survival(int z_directed, int n, double r, long t) {
  if (t < 0) throw InvalidInput("time must be nonnegative");
  if (z_directed < 0 || z_directed > n) throw InvalidInput("directed distance out of range");
  const double diffusion = r * (1.0 - r);
  CompensatedSum sum;
  for (int j = 1; j < n; ++j) {
    const double c = cos_pi_ratio(j, n);
    const double g = sin_pi_ratio(j, z_directed, n) * sin_pi_ratio(j, 1, n) / (1.0 - c);
    const double h = 1.0 - 2.0 * diffusion * (1.0 - c);
    sum += g * std::pow(h, static_cast<double>(t));
  }
  return sum.value() / n;
}

double balding_cdf(const RingConfig& c, double r, long t) {
  const int tokens = c.token_count();
  require_pairable(tokens);
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("synchronous pass probability must lie in (0,1)");
  const int n = c.size();
  const auto gv = c.gaps();
  const auto pairings = enumerate_pairings(tokens);

  // Per unordered pair: P(T<=t, down) - P(T<=t, up).
  std::map<std::pair<int, int>, double> factor;
  for (int u = 1; u <= tokens; ++u) {
    for (int v = u + 1; v <= tokens; ++v) {
      const int z = gv.pair_distance(u, v);
      const double down = absorption_prob_double(z, n, Direction::down) - pair_survival(z, n, r, t);
      const double up = absorption_prob_double(z, n, Direction::up) - pair_survival(n - z, n, r, t);
      factor[{u, v}] = down - up;
    }
  }
  CompensatedSum sum;
  for (const auto& p : pairings) {
    double prod = p.sign;
    for (const auto& pr : p.pairs) prod *= factor.at({pr.u, pr.v});
    sum += prod;
  }
  const double value = sum.value();
  if (value < -1e-9 || value > 1.0 + 1e-9) {
    throw EngineError("pairing CDF left [0,1]: " + std::to_string(value));
  }
  return value;
}

Rational signed_absorption_mass(const RingConfig& c) {
  const int tokens = c.token_count();
  require_pairable(tokens);
  const auto gv = c.gaps();
  Rational total = 0;
  for (const auto& dp : enumerate_directed_pairings(tokens)) {
    Rational prod = dp.directed_sign;
    for (std::size_t i = 0; i < dp.pairs.size(); ++i) {
      prod *= absorption_prob(gv.pair_distance(dp.pairs[i].u, dp.pairs[i].v), c.size(), dp.directions[i]);
    }
    total += prod;
  }
  total.canonicalize();
  return total;
}

double finite_f(std::span<const int> z, int n, double r) {
  const auto k = z.size();
  if (k == 0) throw InvalidInput("F needs at least one coordinate");
  const double diffusion = r * (1.0 - r);
  std::vector<double> h(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> g(k, std::vector<double>(static_cast<std::size_t>(n)));
  double h_max = 0.0;
  for (int j = 1; j < n; ++j) {
    const double c = cos_pi_ratio(j, n);
    h[static_cast<std::size_t>(j)] = 1.0 - 2.0 * diffusion * (1.0 - c);
    h_max = std::max(h_max, std::fabs(h[static_cast<std::size_t>(j)]));
    for (std::size_t i = 0; i < k; ++i) {
      g[i][static_cast<std::size_t>(j)] = sin_pi_ratio(j, z[i], n) * sin_pi_ratio(j, 1, n) / (1.0 - c);
    }
  }
  // Denominator floor: |prod h| <= h_max < 1 for j >= 1.
  if (!(h_max < 1.0)) throw EngineError("resonant denominator in finite expression");

  CompensatedSum sum;
  std::function<void(std::size_t, double, double)> recurse = [&](std::size_t dim, double gp, double hp) {
    for (int j = 1; j < n; ++j) {
      const double g_next = gp * g[dim][static_cast<std::size_t>(j)];
      const double h_next = hp * h[static_cast<std::size_t>(j)];
      if (dim + 1 == k) {
        sum += g_next / (1.0 - h_next);
      } else {
        recurse(dim + 1, g_next, h_next);
      }
    }
  };
  recurse(0, 1.0, 1.0);
  const double scale = -std::pow(-1.0 / n, static_cast<double>(k));
  return scale * sum.value();
}

double expected_time_finite(const RingConfig& c, double r, const FiniteOptions& options,
                            std::vector<TermRecord>* dump) {
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("synchronous pass probability must lie in (0,1)");
  const int tokens = c.token_count();
  require_pairable(tokens);
  const int m = (tokens - 1) / 2;
  double directed = 1.0;  // M!/m!
  for (int i = m + 1; i <= tokens; ++i) directed *= i;
  const double cost = std::pow(static_cast<double>(c.size() - 1), m) * directed;
  if (cost > options.max_terms) {
    throw ResourceError("finite expression needs about " + std::to_string(cost) +
                        " term evaluations, budget is " + std::to_string(options.max_terms));
  }
  const int n = c.size();
  return directed_subset_sum(
      c, [&](const std::vector<int>& z) { return TermValue{finite_f(z, n, r), 0.0}; }, dump, nullptr);
}

double f_tilde_tail_majorant(int k, long cap) {
  if (k < 1 || cap < 1) throw InvalidInput("tail majorant needs k >= 1 and cap >= 1");
  const double c = static_cast<double>(cap);
  if (k == 1) return 1.0 / (2.0 * c * c);
  // For j_k > cap: j_k^2 + R >= j_k^(2-2a) R^a and R >= prod_{i<k} j_i^(2/(k-1)),
  // so the tail is at most k * cap^(2a-2)/(2-2a) * zeta(1 + 2a/(k-1))^(k-1).
  double best = std::numeric_limits<double>::infinity();
  const double rest = static_cast<double>(k - 1);
  for (int step = 1; step < 100; ++step) {
    const double a = step / 100.0;
    const double head = std::pow(c, 2.0 * a - 2.0) / (2.0 - 2.0 * a);
    const double zeta = std::riemann_zeta(1.0 + 2.0 * a / rest);
    best = std::min(best, k * head * std::pow(zeta, rest));
  }
  return best;
}

SeriesValue f_tilde(std::span<const double> y, const SeriesControl& control) {
  const int k = static_cast<int>(y.size());
  if (k == 0) throw InvalidInput("F~ needs at least one coordinate");
  for (double v : y) {
    if (v < 0.0 || v > 1.0) throw InvalidInput("F~ arguments must lie in [0,1]");
  }
  // sin(j pi y) vanishes term-wise at y = 0 and y = 1.
  if (std::any_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; })) return {0.0, 0.0, 0};
  const long cap = choose_cap(k, control);
  std::vector<std::vector<double>> tables(y.size(), std::vector<double>(static_cast<std::size_t>(cap)));
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (long j = 1; j <= cap; ++j) {
      tables[i][static_cast<std::size_t>(j - 1)] = std::sin(y[i] * static_cast<double>(j) * kPi) / static_cast<double>(j);
    }
  }
  return f_tilde_from_tables(std::move(tables), k, cap);
}

bool r_in_continuous_range(double r) {
  const double half_width = std::pow(27.0, 0.25) / 6.0;
  return r > 0.5 - half_width && r < 0.5 + half_width;
}

ContinuousEstimate expected_time_continuous(const RingConfig& c, double r, const SeriesControl& control) {
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("synchronous pass probability must lie in (0,1)");
  const int n = c.size();
  auto f = [&](const std::vector<int>& z) -> TermValue {
    const int k = static_cast<int>(z.size());
    if (std::any_of(z.begin(), z.end(), [n](int v) { return v == 0 || v == n; })) return {0.0, 0.0};
    const long cap = choose_cap(k, control);
    std::vector<std::vector<double>> tables(z.size(), std::vector<double>(static_cast<std::size_t>(cap)));
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (long j = 1; j <= cap; ++j) {
        tables[i][static_cast<std::size_t>(j - 1)] = sin_pi_ratio(j, z[i], n) / static_cast<double>(j);
      }
    }
    const auto sv = f_tilde_from_tables(std::move(tables), k, cap);
    return {sv.value, sv.error_bound};
  };
  double error = 0.0;
  const double sum = directed_subset_sum(c, f, nullptr, &error);
  const double scale = static_cast<double>(n) * n / (r * (1.0 - r));
  return {scale * sum, scale * error, r_in_continuous_range(r)};
}

BaldingMcResult balding_expectation_mc(const RingConfig& c, const ProtocolParams& params,
                                       std::size_t trials, std::uint64_t seed) {
  const int tokens = c.token_count();
  require_pairable(tokens);
  if (trials < 2) throw InvalidInput("need at least two trials per directed pairing");
  const int n = c.size();
  const auto gv = c.gaps();
  const auto directed = enumerate_directed_pairings(tokens);

  BaldingMcResult out;
  CompensatedSum estimate;
  CompensatedSum variance;
  CompensatedSum mass;

  for (std::size_t id = 0; id < directed.size(); ++id) {
    const auto& dp = directed[id];
    double p_all = 1.0;
    std::vector<int> start;
    for (std::size_t i = 0; i < dp.pairs.size(); ++i) {
      const int z = gv.pair_distance(dp.pairs[i].u, dp.pairs[i].v);
      const double p = absorption_prob_double(z, n, dp.directions[i]);
      if (p < 1e-3) {
        throw EngineError("rejection sampling starved: collision side probability " + std::to_string(p));
      }
      p_all *= p;
      start.push_back(z);
    }
    mass += dp.directed_sign * p_all;

    TrialRng rng(seed, id);
    // Pair distance z(v) - z(u): u passing shrinks it, v passing grows it.
    auto pair_time = [&](int z, Direction side) {
      for (std::size_t attempt = 0; attempt < 10'000'000; ++attempt) {
        int d = z;
        double time = 0.0;
        while (d > 0 && d < n) {
          if (params.is_sync()) {
            const bool u_moves = rng.bernoulli(params.r);
            const bool v_moves = rng.bernoulli(params.r);
            d += (v_moves ? 1 : 0) - (u_moves ? 1 : 0);
            time += 1.0;
          } else {
            time += rng.exponential(2.0 * params.lambda);
            d += rng.bernoulli(0.5) ? 1 : -1;
          }
        }
        const Direction got = d == 0 ? Direction::down : Direction::up;
        if (got == side) return time;
        ++out.rejected;
      }
      throw EngineError("rejection sampling starved");
    };

    CompensatedSum sum;
    CompensatedSum sum_sq;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      double longest = 0.0;
      for (std::size_t i = 0; i < start.size(); ++i) longest = std::max(longest, pair_time(start[i], dp.directions[i]));
      sum += longest;
      sum_sq += longest * longest;
    }
    const double t = static_cast<double>(trials);
    const double mean = sum.value() / t;
    const double var = std::max(0.0, (sum_sq.value() - t * mean * mean) / (t - 1.0));
    estimate += dp.directed_sign * mean * p_all;
    variance += p_all * p_all * var / t;
  }
  out.estimate = estimate.value();
  out.std_error = std::sqrt(variance.value());
  out.signed_mass = mass.value();
  return out;
}

void write_term_csv(std::ostream& os, std::span<const TermRecord> terms) {
  os << "pairing_id,subset_mask,sign,F_value,G_value,contribution\n";
  os.precision(17);
  for (const auto& t : terms) {
    os << t.pairing_id << ',' << t.subset_mask << ',' << t.sign << ',' << t.f_value << ',' << t.g_value << ','
       << t.contribution << '\n';
  }
}

}  // namespace herman
