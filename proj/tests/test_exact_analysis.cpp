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

#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "herman/error.hpp"
#include "herman/exact_analysis.hpp"
#include "herman/rational.hpp"
#include "herman/ring_core.hpp"

using namespace herman;

namespace {

std::vector<RingConfig> three_token_configs(int n) {
  std::vector<RingConfig> out;
  for (int p = 2; p <= n; ++p) {
    for (int q = p + 1; q <= n; ++q) out.push_back(RingConfig::from_tokens(n, std::vector<int>{1, p, q}));
  }
  return out;
}

}  // namespace

TEST_CASE("base cases by hand") {
  const auto full3 = gen_full(3);
  CHECK(exact_sync(full3, Rational(1, 2)).exact_at(full3) == Rational(4, 3));
  CHECK(exact_async(full3, Rational(1)).exact_at(full3) == Rational(1, 3));
  CHECK(exact_sync(gen_legitimate(7), Rational(1, 2)).exact_at(gen_legitimate(7)) == 0);
  // Sync with general r: each round stabilizes unless all or none pass.
  const Rational r(3, 10);
  const Rational stay = r * r * r + (1 - r) * (1 - r) * (1 - r);
  CHECK(exact_sync(full3, r).exact_at(full3) == 1 / (1 - stay));
}

TEST_CASE("rational solver reproduces abc/(DN) on small rings") {
  for (int n : {5, 7, 9}) {
    for (const auto& r : {Rational(3, 10), Rational(1, 2)}) {
      const Rational d = r * (1 - r);
      for (const auto& c : three_token_configs(n)) {
        const auto sol = exact_sync(c, r);
        const auto g = c.gaps();
        REQUIRE(sol.exact_at(c) == triangle_formula(Rational(g[0]), Rational(g[1]), Rational(g[2]), d));
      }
    }
  }
}

TEST_CASE("float and rational modes agree") {
  const auto c = gen_random_tokens(9, 5, 4);
  const auto q = exact_sync(c, Rational(1, 2));
  const auto f = exact_sync(c, 0.5);
  for (const auto& [key, state] : q.values) REQUIRE(std::fabs(f.values.at(key).expected - state.expected) < 1e-9);
}

TEST_CASE("rotation reduction does not change values") {
  SolverOptions reduced;
  reduced.rotation_reduction = true;
  for (int n : {7, 9}) {
    const auto c = gen_random_tokens(n, 5, static_cast<std::uint64_t>(n));
    const auto plain = exact_sync(c, Rational(3, 10));
    const auto rot = exact_sync(c, Rational(3, 10), reduced);
    CHECK(rot.values.size() < plain.values.size());
    for (const auto& [key, state] : plain.values) {
      const auto cfg = RingConfig::from_tokens(n, state.tokens);
      REQUIRE(rot.exact_at(cfg) == *state.exact);
    }
    const auto pa = exact_async(c, Rational(1, 2));
    const auto ra = exact_async(c, Rational(1, 2), reduced);
    CHECK(ra.exact_at(c) == pa.exact_at(c));
  }
}

TEST_CASE("state budget is enforced") {
  SolverOptions tight;
  tight.max_states = 50;
  CHECK_THROWS_AS(exact_sync(gen_full(11), 0.5, tight), ResourceError);
  CHECK_THROWS_AS(exact_sync(gen_full(25), 0.5), ResourceError);
}

TEST_CASE("cdf is a distribution function whose tail sums to the mean") {
  const auto c = gen_random_tokens(9, 5, 2);
  const auto cdf = cdf_sync(c, 0.5, 2000);
  for (std::size_t t = 1; t < cdf.size(); ++t) REQUIRE(cdf[t] >= cdf[t - 1] - 1e-15);
  CHECK(cdf.front() == 0.0);
  CHECK(cdf.back() == doctest::Approx(1.0).epsilon(1e-12));
  double tail = 0.0;
  for (double p : cdf) tail += 1.0 - p;
  CHECK(tail == doctest::Approx(exact_sync(c, 0.5).at(c)).epsilon(1e-9));
}

TEST_CASE("worst-case bound constants") {
  CHECK(worst_case_constant() == doctest::Approx(0.1596265).epsilon(1e-6));
  CHECK(worst_case_bound(9, 0.25) == doctest::Approx(51.719).epsilon(1e-4));
  CHECK(worst_case_bound(1000, 0.25) / 1e6 == doctest::Approx(0.6385).epsilon(1e-3));
  CHECK(stage_bound_tau(9, 3, 0.25) == doctest::Approx(24.0));
  CHECK(cumulative_stage_bound(9, 3, 0.25) == doctest::Approx(24.0));
  // The square sum tends to (pi^2/8 - 1) N^2 / D.
  const double n = 100001;
  const double limit = (std::numbers::pi * std::numbers::pi / 8.0 - 1.0) * n * n / 0.25;
  CHECK(cumulative_square_bound(100001, 100001, 0.25) / limit == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("every solved value respects the worst-case bound") {
  for (int n : {5, 7, 9, 11}) {
    for (double r : {0.1, 0.5, 0.9}) {
      const auto sol = exact_sync(gen_random_tokens(n, n >= 9 ? 5 : 3, 1), r);
      const double bound = worst_case_bound(n, r * (1 - r));
      for (const auto& [key, state] : sol.values) REQUIRE(state.expected <= bound);
    }
  }
}

TEST_CASE("first annihilation time is within the stage bound") {
  SolverOptions first;
  for (int n : {7, 9, 11, 13}) {
    first.absorb_below = 3;
    const auto three = exact_sync(gen_equilateral(n), 0.5, first);
    for (const auto& [key, state] : three.values) REQUIRE(state.expected <= stage_bound_tau(n, 3, 0.25) + 1e-12);
    first.absorb_below = 5;
    const auto five = exact_sync(gen_random_tokens(n, 5, 1), 0.5, first);
    for (const auto& [key, state] : five.values) {
      if (state.token_count == 5) REQUIRE(state.expected <= stage_bound_tau(n, 5, 0.25) + 1e-12);
    }
  }
}

TEST_CASE("full configuration constants") {
  const double c = full_config_mean_constant();
  CHECK(c <= 0.0285);
  CHECK(c == doctest::Approx(0.028457).epsilon(1e-4));
  const auto b = full_config_bounds(101, 0.25);
  CHECK(b.mean_bound == doctest::Approx(1162.9).epsilon(1e-4));
  CHECK(b.median_threshold == doctest::Approx(816.08).epsilon(1e-4));
}

TEST_CASE("token-count curves") {
  CHECK((full_token_expectation_S_tilde(1.0, 0.01) - 1.0) / 2.0 == doctest::Approx(0.9104).epsilon(1e-3));
  CHECK((full_token_expectation_S_tilde(1.0, 0.02) - 1.0) / 2.0 == doctest::Approx(0.4973).epsilon(1e-3));
  CHECK(full_token_expectation_S(101, 0.25, 0.0) == 101.0);
  // Finite-N curve approaches the limit for large N at fixed sigma^2 t.
  const int n = 2001;
  const double sigma2 = 0.25 / (static_cast<double>(n) * n);
  for (double x : {0.005, 0.01, 0.05}) {
    CHECK(full_token_expectation_S(n, 0.25, x / sigma2) ==
          doctest::Approx(full_token_expectation_S_tilde(sigma2, x / sigma2)).epsilon(1e-3));
  }
  CHECK_THROWS_AS(full_token_expectation_S_tilde(1.0, 0.0), InvalidInput);
}

TEST_CASE("canonical rotation") {
  CHECK(canonical_rotation(9, std::vector<int>{2, 5, 8}) == std::vector<int>{1, 4, 7});
  CHECK(canonical_rotation(11, std::vector<int>{3, 4, 8}) == std::vector<int>{1, 2, 6});
}
