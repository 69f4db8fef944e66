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

#include "herman/exact_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <ostream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "herman/dynamics.hpp"
#include "herman/error.hpp"

namespace herman {

namespace {

using Tokens = std::vector<int>;

std::string literal_of(int n, const Tokens& tokens) {
  std::string out = "N=" + std::to_string(n) + ";tokens=";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(tokens[i]);
  }
  return out;
}

template <typename Scalar>
struct Chain {
  std::vector<Tokens> states;
  std::map<Tokens, std::size_t> index;
  std::vector<std::vector<std::pair<std::size_t, Scalar>>> transitions;
  std::vector<Scalar> holding;
  std::vector<bool> absorbing;
};

template <typename Scalar>
Scalar power(const Scalar& base, int exponent) {
  Scalar out = 1;
  for (int i = 0; i < exponent; ++i) out *= base;
  return out;
}

/// Successor distribution of one state.
template <typename Scalar>
struct Kernel {
  bool synchronous = true;
  Scalar rate;  // r or lambda
  int n = 0;
  bool reduce = false;

  Tokens normalize(Tokens t) const { return reduce ? canonical_rotation(n, t) : t; }

  Scalar holding_time(const Tokens& tokens) const {
    if (synchronous) return Scalar(1);
    return Scalar(1) / (Scalar(static_cast<long>(tokens.size())) * rate);
  }

  std::map<Tokens, Scalar> successors(const Tokens& tokens) const {
    std::map<Tokens, Scalar> out;
    const auto count = tokens.size();
    if (synchronous) {
      const Scalar stay = Scalar(1) - rate;
      std::vector<Scalar> by_moves(count + 1);
      for (std::size_t k = 0; k <= count; ++k) {
        by_moves[k] = power(rate, static_cast<int>(k)) * power(stay, static_cast<int>(count - k));
      }
      std::vector<std::uint8_t> moves(count);
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << count); ++mask) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < count; ++i) {
          moves[i] = (mask >> i) & 1U;
          k += moves[i];
        }
        auto next = normalize(apply_sync_moves(n, tokens, moves));
        auto [it, inserted] = out.try_emplace(std::move(next), Scalar(0));
        it->second += by_moves[k];
      }
    } else {
      const Scalar share = Scalar(1) / Scalar(static_cast<long>(count));
      for (std::size_t u = 0; u < count; ++u) {
        auto next = normalize(apply_async_move(n, tokens, u));
        auto [it, inserted] = out.try_emplace(std::move(next), Scalar(0));
        it->second += share;
      }
    }
    return out;
  }
};

template <typename Scalar>
Chain<Scalar> explore(const RingConfig& start, const Kernel<Scalar>& kernel, const SolverOptions& options) {
  if (start.token_count() > 20) {
    throw ResourceError("exact solver limited to at most 20 tokens, got " + std::to_string(start.token_count()));
  }
  const std::size_t budget = std::min(options.max_states, kHardStateLimit);
  Chain<Scalar> chain;
  std::deque<std::size_t> queue;
  auto intern = [&](Tokens t) -> std::size_t {
    auto [it, inserted] = chain.index.try_emplace(t, chain.states.size());
    if (inserted) {
      if (chain.states.size() >= budget) {
        throw ResourceError("reachable state space exceeds budget of " + std::to_string(budget) +
                            " states (more than " + std::to_string(chain.states.size()) + " reached)");
      }
      chain.states.push_back(std::move(t));
      chain.absorbing.push_back(static_cast<int>(chain.states.back().size()) < options.absorb_below);
      chain.transitions.emplace_back();
      chain.holding.emplace_back(0);
      queue.push_back(it->second);
    }
    return it->second;
  };
  intern(kernel.normalize(start.token_positions()));
  while (!queue.empty()) {
    const std::size_t s = queue.front();
    queue.pop_front();
    if (chain.absorbing[s]) continue;
    const Tokens tokens = chain.states[s];
    auto succ = kernel.successors(tokens);
    std::vector<std::pair<std::size_t, Scalar>> row;
    row.reserve(succ.size());
    for (auto& [next, p] : succ) row.emplace_back(intern(next), p);
    chain.transitions[s] = std::move(row);
    chain.holding[s] = kernel.holding_time(tokens);
  }
  return chain;
}

/// Solves (I - P) E = h on the transient states. Token counts never grow, so
/// the system is block triangular in M; each block is eliminated with sparse
/// Gaussian elimination without pivoting (I - P restricted to a block is a
/// nonsingular M-matrix, so the pivots stay positive).
/// Blocks this small are eliminated densely in floating point: fill-in makes
/// the sparse rows dense anyway and contiguous storage is much faster.
constexpr std::size_t kDenseBlockLimit = 3200;

template <typename Scalar>
void solve_block_dense(const Chain<Scalar>& chain, const std::vector<std::size_t>& members,
                       const std::map<std::size_t, std::size_t>& local, std::vector<Scalar>& value) {
  const std::size_t size = members.size();
  std::vector<double> a(size * size, 0.0);
  std::vector<double> rhs(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t s = members[i];
    a[i * size + i] = 1.0;
    rhs[i] = chain.holding[s];
    for (const auto& [t, p] : chain.transitions[s]) {
      if (chain.absorbing[t]) continue;
      if (auto it = local.find(t); it != local.end()) {
        a[i * size + it->second] -= p;
      } else {
        rhs[i] += p * value[t];
      }
    }
  }
  // I - P is a nonsingular M-matrix, so elimination without pivoting is stable.
  for (std::size_t k = 0; k < size; ++k) {
    const double pivot = a[k * size + k];
    if (!(pivot > 0.0)) throw EngineError("nonpositive pivot in hitting-time elimination");
    const double* row_k = &a[k * size];
    for (std::size_t i = k + 1; i < size; ++i) {
      double* row_i = &a[i * size];
      if (row_i[k] == 0.0) continue;
      const double factor = row_i[k] / pivot;
      row_i[k] = 0.0;
      for (std::size_t j = k + 1; j < size; ++j) row_i[j] -= factor * row_k[j];
      rhs[i] -= factor * rhs[k];
    }
  }
  std::vector<double> x(size);
  for (std::size_t k = size; k-- > 0;) {
    double acc = rhs[k];
    for (std::size_t j = k + 1; j < size; ++j) acc -= a[k * size + j] * x[j];
    x[k] = acc / a[k * size + k];
  }
  for (std::size_t i = 0; i < size; ++i) value[members[i]] = x[i];
}

template <typename Scalar>
std::vector<Scalar> solve_chain(const Chain<Scalar>& chain) {
  const std::size_t total = chain.states.size();
  std::vector<Scalar> value(total, Scalar(0));
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t s = 0; s < total; ++s) {
    if (!chain.absorbing[s]) groups[chain.states[s].size()].push_back(s);
  }
  for (const auto& [count, members] : groups) {
    const std::size_t size = members.size();
    std::map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < size; ++i) local[members[i]] = i;

    if constexpr (std::is_same_v<Scalar, double>) {
      if (size > 1 && size <= kDenseBlockLimit) {
        solve_block_dense(chain, members, local, value);
        continue;
      }
    }

    std::vector<std::map<std::size_t, Scalar>> rows(size);
    std::vector<Scalar> rhs(size);
    std::vector<std::set<std::size_t>> col_rows(size);
    for (std::size_t i = 0; i < size; ++i) {
      const std::size_t s = members[i];
      rows[i][i] = Scalar(1);
      rhs[i] = chain.holding[s];
      for (const auto& [t, p] : chain.transitions[s]) {
        if (chain.absorbing[t]) continue;
        if (auto it = local.find(t); it != local.end()) {
          rows[i][it->second] -= p;
        } else {
          rhs[i] += p * value[t];  // lower block, already solved
        }
      }
      for (const auto& [col, v] : rows[i]) col_rows[col].insert(i);
    }

    for (std::size_t k = 0; k < size; ++k) {
      const Scalar pivot = rows[k].at(k);
      if (!(pivot > 0)) throw EngineError("nonpositive pivot in hitting-time elimination");
      for (auto it = col_rows[k].upper_bound(k); it != col_rows[k].end(); ++it) {
        const std::size_t i = *it;
        auto entry = rows[i].find(k);
        if (entry == rows[i].end()) continue;
        const Scalar factor = entry->second / pivot;
        rows[i].erase(entry);
        for (auto pk = rows[k].upper_bound(k); pk != rows[k].end(); ++pk) {
          auto [slot, inserted] = rows[i].try_emplace(pk->first, Scalar(0));
          slot->second -= factor * pk->second;
          if (inserted) col_rows[pk->first].insert(i);
        }
        rhs[i] -= factor * rhs[k];
      }
    }
    std::vector<Scalar> x(size);
    for (std::size_t k = size; k-- > 0;) {
      Scalar acc = rhs[k];
      for (auto pk = rows[k].upper_bound(k); pk != rows[k].end(); ++pk) acc -= pk->second * x[pk->first];
      x[k] = acc / rows[k].at(k);
    }
    for (std::size_t i = 0; i < size; ++i) value[members[i]] = x[i];
  }
  return value;
}

double as_double(double v) { return v; }
double as_double(const Rational& v) { return v.get_d(); }

template <typename Scalar>
ExactSolution solve(const RingConfig& start, bool synchronous, const Scalar& rate, std::string rate_text,
                    const SolverOptions& options) {
  Kernel<Scalar> kernel{synchronous, rate, start.size(), options.rotation_reduction};
  const auto chain = explore(start, kernel, options);
  const auto value = solve_chain(chain);

  ExactSolution sol;
  sol.params = synchronous ? ProtocolParams::sync(as_double(rate)) : ProtocolParams::async(as_double(rate));
  sol.mode = std::is_same_v<Scalar, Rational> ? ArithmeticMode::rational : ArithmeticMode::float64;
  sol.rate_text = std::move(rate_text);
  sol.n = start.size();
  sol.rotation_reduced = options.rotation_reduction;
  sol.absorb_below = options.absorb_below;
  sol.start_key = literal_of(start.size(), chain.states.front());
  for (std::size_t s = 0; s < chain.states.size(); ++s) {
    SolvedState st;
    st.tokens = chain.states[s];
    st.token_count = static_cast<int>(st.tokens.size());
    st.expected = as_double(value[s]);
    if constexpr (std::is_same_v<Scalar, Rational>) st.exact = value[s];
    sol.values.emplace(literal_of(start.size(), chain.states[s]), std::move(st));
  }
  return sol;
}

void check_sync_rate(double r) {
  if (!(r > 0.0 && r < 1.0)) throw InvalidInput("synchronous pass probability must lie in (0,1)");
}

void check_async_rate(double lambda) {
  if (!(lambda > 0.0)) throw InvalidInput("asynchronous pass rate must be positive");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<int> canonical_rotation(int n, std::span<const int> positions) {
  const std::size_t count = positions.size();
  std::vector<int> best;
  std::vector<int> candidate(count);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t i = 0; i < count; ++i) {
      candidate[i] = clockwise_distance(n, positions[s], positions[(s + i) % count]) + 1;
    }
    if (best.empty() || candidate < best) best = candidate;
  }
  return best;
}

std::string ExactSolution::key_for(const RingConfig& c) const {
  if (c.size() != n) throw InvalidInput("configuration ring size does not match the solution");
  const auto& tokens = c.token_positions();
  return rotation_reduced ? literal_of(n, canonical_rotation(n, tokens)) : literal_of(n, tokens);
}

bool ExactSolution::contains(const RingConfig& c) const { return values.count(key_for(c)) > 0; }

const SolvedState& ExactSolution::state(const RingConfig& c) const {
  const auto key = key_for(c);
  auto it = values.find(key);
  if (it == values.end()) throw InvalidInput("configuration " + key + " is not reachable from " + start_key);
  return it->second;
}

const Rational& ExactSolution::exact_at(const RingConfig& c) const {
  const auto& st = state(c);
  if (!st.exact) throw InvalidInput("solution was computed in float64 mode");
  return *st.exact;
}

void ExactSolution::write_csv(std::ostream& os) const {
  os << "config_key,M,expected_time\n";
  for (const auto& [key, st] : values) {
    os << '"' << key << "\"," << st.token_count << ',';
    if (st.exact) {
      os << st.exact->get_str();
    } else {
      os << format_double(st.expected);
    }
    os << '\n';
  }
}

ExactSolution exact_sync(const RingConfig& start, const Rational& r, const SolverOptions& options) {
  check_sync_rate(r.get_d());
  if (r <= 0 || r >= 1) throw InvalidInput("synchronous pass probability must lie in (0,1)");
  return solve<Rational>(start, true, r, r.get_str(), options);
}

ExactSolution exact_sync(const RingConfig& start, double r, const SolverOptions& options) {
  check_sync_rate(r);
  return solve<double>(start, true, r, format_double(r), options);
}

ExactSolution exact_async(const RingConfig& start, const Rational& lambda, const SolverOptions& options) {
  if (lambda <= 0) throw InvalidInput("asynchronous pass rate must be positive");
  return solve<Rational>(start, false, lambda, lambda.get_str(), options);
}

ExactSolution exact_async(const RingConfig& start, double lambda, const SolverOptions& options) {
  check_async_rate(lambda);
  return solve<double>(start, false, lambda, format_double(lambda), options);
}

std::vector<double> cdf_sync(const RingConfig& start, double r, int t_max, const SolverOptions& options) {
  check_sync_rate(r);
  if (t_max < 0) throw InvalidInput("t_max must be nonnegative");
  Kernel<double> kernel{true, r, start.size(), options.rotation_reduction};
  const auto chain = explore(start, kernel, options);
  const std::size_t total = chain.states.size();

  std::vector<double> mass(total, 0.0);
  std::vector<double> next(total);
  mass[0] = 1.0;
  std::vector<double> cdf;
  cdf.reserve(static_cast<std::size_t>(t_max) + 1);
  auto absorbed = [&] {
    double acc = 0.0;
    for (std::size_t s = 0; s < total; ++s) {
      if (chain.absorbing[s]) acc += mass[s];
    }
    return acc;
  };
  cdf.push_back(absorbed());
  for (int t = 1; t <= t_max; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < total; ++s) {
      if (mass[s] == 0.0) continue;
      if (chain.absorbing[s]) {
        next[s] += mass[s];
        continue;
      }
      for (const auto& [dest, p] : chain.transitions[s]) next[dest] += mass[s] * p;
    }
    mass.swap(next);
    cdf.push_back(absorbed());
  }
  return cdf;
}

Rational triangle_formula(const Rational& a, const Rational& b, const Rational& c, const Rational& diffusion) {
  if (a <= 0 || b <= 0 || c <= 0 || diffusion <= 0) {
    throw InvalidInput("triangle formula needs positive gaps and diffusion constant");
  }
  Rational out = a * b * c / (diffusion * (a + b + c));
  out.canonicalize();
  return out;
}

double triangle_formula(double a, double b, double c, double diffusion) {
  if (!(a > 0 && b > 0 && c > 0 && diffusion > 0)) {
    throw InvalidInput("triangle formula needs positive gaps and diffusion constant");
  }
  return a * b * c / (diffusion * (a + b + c));
}

double worst_case_constant() { return std::numbers::pi * std::numbers::pi / 8.0 - 29.0 / 27.0; }

double worst_case_bound(int n, double diffusion) {
  const double nn = n;
  return worst_case_constant() * nn * nn / diffusion;
}

double stage_bound_tau(int n, int tokens, double diffusion) {
  if (tokens < 3 || tokens % 2 == 0) throw InvalidInput("stage bound needs odd M >= 3");
  const double q = static_cast<double>(n / tokens);
  return q * (q + 1.0) / (2.0 * diffusion);
}

double cumulative_stage_bound(int n, int tokens, double diffusion) {
  double total = 0.0;
  for (int m = 3; m <= tokens; m += 2) total += stage_bound_tau(n, m, diffusion);
  return total;
}

double cumulative_square_bound(int n, int tokens, double diffusion) {
  const double nn = n;
  double total = 0.0;
  for (int m = 3; m <= tokens; m += 2) total += nn * nn / (static_cast<double>(m) * m * diffusion);
  return total;
}

double full_token_expectation_S(int n, double diffusion, double t) {
  if (t < 0.0) throw InvalidInput("time must be nonnegative");
  if (t == 0.0) return n;
  const double pi = std::numbers::pi;
  const double nn = n;
  const double sigma2 = diffusion / (nn * nn);
  const double prefactor = 2.0 * nn / pi;
  // |tan(j pi / N)| <= cot(pi / 2N) for integer j when N is odd.
  const double tan_max = 1.0 / std::tan(pi / (2.0 * nn));
  double sum = 0.0;
  for (long j = 1;; ++j) {
    const double jj = static_cast<double>(j);
    const double decay = std::exp(-4.0 * pi * pi * jj * jj * sigma2 * t);
    sum += std::tan(jj * pi / nn) / jj * decay;
    const double majorant = prefactor * tan_max / jj * decay;
    if (majorant < 1e-14 * std::max(1.0, std::fabs(1.0 + prefactor * sum))) break;
    if (j > 100'000'000) throw ResourceError("S(t) series did not converge; t too small");
  }
  return 1.0 + prefactor * sum;
}

double full_token_expectation_S_tilde(double sigma2, double t) {
  if (!(t > 0.0) || !(sigma2 > 0.0)) throw InvalidInput("S_tilde needs t > 0 and sigma2 > 0");
  const double pi = std::numbers::pi;
  double sum = 0.0;
  for (long j = 1;; ++j) {
    const double jj = static_cast<double>(j);
    const double term = std::exp(-4.0 * pi * pi * jj * jj * sigma2 * t);
    sum += term;
    if (term < 1e-14 * (1.0 + 2.0 * sum)) break;
    if (j > 100'000'000) throw ResourceError("S_tilde series did not converge; t too small");
  }
  return 1.0 + 2.0 * sum;
}

FullConfigBounds full_config_bounds(int n, double diffusion) {
  if (n < 3 || n % 2 == 0) throw InvalidInput("ring size must be odd and at least 3");
  if (!(diffusion > 0.0)) throw InvalidInput("diffusion constant must be positive");
  const double scale = static_cast<double>(n) * n / diffusion;
  return {0.0285 * scale, 0.02 * scale};
}

double full_config_mean_constant() {
  const double pi = std::numbers::pi;
  const double t1 = 0.01;  // sigma2 * t1
  double sum = 0.0;
  for (int j = 1; j < 100; ++j) {
    const double jj = j;
    sum += std::exp(-4.0 * pi * pi * jj * jj * t1) / (4.0 * pi * pi * jj * jj);
  }
  return t1 + sum;
}

}  // namespace herman
