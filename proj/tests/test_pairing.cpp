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
#include "herman/pairing.hpp"
#include "herman/ring_core.hpp"

using namespace herman;

namespace {

// E[T; absorbed at 0] for the lazy +-1 walk with step probability D each way,
// solved as a dense tridiagonal system (Thomas algorithm).
std::vector<double> oracle_pair_time(int n, double d) {
  const int inner = n - 1;
  std::vector<double> a(inner, -d), b(inner, 2 * d), c(inner, -d), rhs(inner);
  for (int x = 1; x < n; ++x) rhs[x - 1] = 1.0 - static_cast<double>(x) / n;
  for (int i = 1; i < inner; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> sol(inner);
  sol[inner - 1] = rhs[inner - 1] / b[inner - 1];
  for (int i = inner - 2; i >= 0; --i) sol[i] = (rhs[i] - c[i] * sol[i + 1]) / b[i];
  return sol;
}

double double_factorial(int m) { return m <= 1 ? 1.0 : m * double_factorial(m - 2); }

}  // namespace

TEST_CASE("pairing counts and signs") {
  for (int m : {3, 5, 7, 9}) {
    const auto p = enumerate_pairings(m);
    CHECK(static_cast<double>(p.size()) == double_factorial(m));
    CHECK(enumerate_directed_pairings(m).size() == p.size() << ((m - 1) / 2));
  }
  const auto three = enumerate_pairings(3);
  REQUIRE(three.size() == 3);
  for (const auto& p : three) {
    const int u = p.pairs[0].u;
    const int v = p.pairs[0].v;
    if (u == 1 && v == 2) CHECK(p.sign == 1);
    if (u == 1 && v == 3) CHECK(p.sign == -1);
    if (u == 2 && v == 3) CHECK(p.sign == 1);
  }
  CHECK(permutation_sign(std::vector<int>{2, 1, 3}) == -1);
  CHECK(permutation_sign(std::vector<int>{2, 3, 1}) == 1);
}

TEST_CASE("absorption probabilities are gambler's ruin exits") {
  CHECK(absorption_prob(3, 9, Direction::down) == Rational(2, 3));
  CHECK(absorption_prob(3, 9, Direction::up) == Rational(1, 3));
  CHECK_THROWS_AS(absorption_prob(0, 9, Direction::up), InvalidInput);
}

TEST_CASE("signed absorption mass is exactly one") {
  for (int m : {3, 5, 7}) {
    for (std::uint64_t s = 0; s < 30; ++s) {
      const auto c = gen_random_tokens(2 * m + 7 + static_cast<int>(2 * (s % 5)), m, s);
      REQUIRE(signed_absorption_mass(c) == 1);
    }
  }
}

TEST_CASE("pair survival starts at the absorption probability and sums to F1") {
  for (int n : {5, 9, 15}) {
    for (double r : {0.3, 0.5}) {
      const double d = r * (1 - r);
      const auto oracle = oracle_pair_time(n, d);
      for (int z = 1; z < n; ++z) {
        CHECK(pair_survival(z, n, r, 0) == doctest::Approx(1.0 - static_cast<double>(z) / n));
        const int zz[1] = {z};
        const double f1 = finite_f(zz, n, r);
        CHECK(f1 == doctest::Approx(oracle[z - 1]).epsilon(1e-10));
        // The discrete walk matches the Brownian form exactly.
        CHECK(f1 == doctest::Approx(z * (n - z) * (2.0 * n - z) / (6.0 * n * d)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("finite expression reproduces the exact solver") {
  for (const auto& c : {gen_equilateral(9), RingConfig::from_tokens(11, std::vector<int>{1, 2, 7})}) {
    for (double r : {0.3, 0.5, 0.7}) {
      CHECK(expected_time_finite(c, r) == doctest::Approx(exact_sync(c, r).at(c)).epsilon(1e-10));
    }
  }
  const auto five = gen_random_tokens(11, 5, 3);
  CHECK(expected_time_finite(five, 0.5) == doctest::Approx(exact_sync(five, 0.5).at(five)).epsilon(1e-9));
  std::vector<TermRecord> terms;
  const double total = expected_time_finite(five, 0.5, {}, &terms);
  double sum = 0.0;
  for (const auto& t : terms) sum += t.contribution;
  CHECK(sum == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("finite expression refuses oversized work and bad input") {
  CHECK_THROWS_AS(expected_time_finite(gen_random_tokens(41, 9, 1), 0.5), ResourceError);
  CHECK_THROWS_AS(expected_time_finite(gen_legitimate(9), 0.5), InvalidInput);
  CHECK_THROWS_AS(expected_time_finite(gen_equilateral(9), 1.0), InvalidInput);
}

TEST_CASE("pairing CDF matches the state iteration") {
  const auto c = RingConfig::from_tokens(7, std::vector<int>{1, 3, 4});
  const auto cdf = cdf_sync(c, 0.5, 60);
  for (long t = 0; t <= 60; ++t) CHECK(balding_cdf(c, 0.5, t) == doctest::Approx(cdf[t]).epsilon(1e-10));
}

TEST_CASE("F~ single coordinate closed form") {
  for (int i = 1; i < 100; ++i) {
    const double y = i / 100.0;
    const double v[1] = {y};
    REQUIRE(std::fabs(f_tilde(v).value - y * (1 - y) * (2 - y) / 6.0) < 1e-10);
  }
  const double edge[2] = {0.0, 0.4};
  CHECK(f_tilde(edge).value == 0.0);
}

TEST_CASE("F~ tail majorant is honest") {
  SeriesControl coarse;
  coarse.tolerance = 1e-4;
  SeriesControl fine;
  fine.tolerance = 1e-8;
  const double y[2] = {0.3, 0.55};
  const auto a = f_tilde(y, coarse);
  const auto b = f_tilde(y, fine);
  CHECK(a.cap < b.cap);
  CHECK(std::fabs(a.value - b.value) <= a.error_bound + b.error_bound);
  for (long cap : {10, 100, 1000}) CHECK(f_tilde_tail_majorant(3, cap) > f_tilde_tail_majorant(3, cap * 10));
}

TEST_CASE("continuous expression for three tokens is the triangle formula") {
  for (int n : {9, 33, 99}) {
    const auto c = gen_equilateral(n);
    const auto g = c.gaps();
    const auto est = expected_time_continuous(c, 0.5);
    const double exact = triangle_formula(g[0], g[1], g[2], 0.25);
    CHECK(std::fabs(est.value - exact) <= 10.0 * est.error_bound);
    CHECK(est.r_in_range);
  }
  CHECK_FALSE(r_in_continuous_range(0.05));
  CHECK(r_in_continuous_range(0.5));
}

TEST_CASE("Monte Carlo over directed pairings") {
  const auto c = gen_equilateral(9);
  const auto res = balding_expectation_mc(c, ProtocolParams::sync(0.5), 20000, 3);
  CHECK(res.signed_mass == doctest::Approx(1.0));
  CHECK(std::fabs(res.estimate - 12.0) < 5.0 * res.std_error);
  const auto a = balding_expectation_mc(c, ProtocolParams::async(1.0), 20000, 3);
  CHECK(std::fabs(a.estimate - 3.0) < 5.0 * a.std_error);
}
