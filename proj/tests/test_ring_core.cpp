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

#include <algorithm>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "herman/error.hpp"
#include "herman/ring_core.hpp"
#include "herman/rng.hpp"

using namespace herman;

namespace {

// Token rule applied directly to a bit vector: i holds a token iff b[i] == b[i-1].
std::vector<int> oracle_tokens(const std::vector<std::uint8_t>& bits) {
  const int n = static_cast<int>(bits.size());
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (bits[i] == bits[(i + n - 1) % n]) out.push_back(i + 1);
  }
  return out;
}

std::vector<std::uint8_t> bits_of(unsigned mask, int n) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) bits[i] = (mask >> i) & 1U;
  return bits;
}

}  // namespace

TEST_CASE("token rule on small hand examples") {
  const std::vector<std::uint8_t> zeros{0, 0, 0};
  CHECK(RingConfig::from_bits(3, zeros).token_positions() == std::vector<int>{1, 2, 3});
  const std::vector<std::uint8_t> b010{0, 1, 0};
  CHECK(RingConfig::from_bits(3, b010).token_positions() == std::vector<int>{1});
  CHECK(RingConfig::from_bits(3, b010).is_legitimate());
}

TEST_CASE("token count has the parity of n for every bit string up to n = 15") {
  for (int n = 3; n <= 15; n += 2) {
    for (unsigned mask = 0; mask < (1U << n); ++mask) {
      const auto bits = bits_of(mask, n);
      const auto c = RingConfig::from_bits(n, bits);
      REQUIRE(c.token_positions() == oracle_tokens(bits));
      REQUIRE(c.token_count() % 2 == 1);
      REQUIRE(c.gaps().sum() == n);
    }
  }
}

TEST_CASE("from_tokens inverts the token rule up to complement") {
  for (unsigned mask = 0; mask < (1U << 11); mask += 7) {
    const auto c = RingConfig::from_bits(11, bits_of(mask, 11));
    const auto d = RingConfig::from_tokens(11, c.token_positions());
    CHECK(d.token_positions() == c.token_positions());
    CHECK(d.bits()[0] == 0);
    bool same = true;
    bool complement = true;
    for (std::size_t i = 0; i < 11; ++i) {
      same = same && d.bits()[i] == c.bits()[i];
      complement = complement && d.bits()[i] != c.bits()[i];
    }
    CHECK((same || complement));
  }
}

TEST_CASE("literals round-trip") {
  const auto c = RingConfig::from_tokens(9, std::vector<int>{1, 4, 7});
  CHECK(c.literal() == "N=9;tokens=1,4,7");
  CHECK(parse_config_literal(c.literal()) == c);
  CHECK(parse_config_literal(c.bits_literal()).token_positions() == c.token_positions());
  CHECK(parse_int_list("3, 5,7") == std::vector<int>{3, 5, 7});
}

TEST_CASE("gap vectors and directed distances") {
  const auto c = RingConfig::from_tokens(11, std::vector<int>{2, 5, 9});
  const auto g = c.gaps();
  CHECK(g.values() == std::vector<int>{3, 4, 4});
  CHECK(g.pair_distance(1, 2) == 3);
  CHECK(g.pair_distance(1, 3) == 7);
  CHECK(g.pair_distance(2, 3) == 4);
  CHECK(g.directed_distance(1, 3, Direction::down) == 7);
  CHECK(g.directed_distance(1, 3, Direction::up) == 4);
  CHECK(min_token_gap(c) == 3);
  CHECK(min_token_gap(gen_legitimate(11)) == 0);
  CHECK(clockwise_distance(11, 9, 2) == 4);
}

TEST_CASE("equilateral gaps are as equal as integrality allows") {
  CHECK(gen_equilateral(9).gaps().values() == std::vector<int>{3, 3, 3});
  CHECK(gen_equilateral(11).gaps().values() == std::vector<int>{3, 4, 4});
  CHECK(gen_equilateral(13).gaps().values() == std::vector<int>{4, 4, 5});
  for (int n = 5; n <= 301; n += 2) {
    const auto g = gen_equilateral(n).gaps().values();
    const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
    REQUIRE(*hi - *lo <= 1);
  }
}

TEST_CASE("full and legitimate generators") {
  CHECK(gen_full(15).token_count() == 15);
  CHECK(gen_legitimate(15, 7).token_positions() == std::vector<int>{7});
}

TEST_CASE("flip-m generator yields flip-m configurations") {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    const int n = 5 + 2 * static_cast<int>(seed % 20);
    const int m = static_cast<int>(seed % 4);
    if (2 * m + 1 > n) continue;
    const auto c = gen_flip_m(n, m, seed);
    REQUIRE(c.token_count() <= 2 * m + 1);
    REQUIRE(is_flip_m(c, m));
  }
  CHECK(gen_flip_m(33, 0, 5).is_legitimate());
  // One flip next to the legitimate token's neighbourhood.
  const auto c = gen_flip_m(9, 1, std::vector<int>{5});
  CHECK(c.token_count() == 3);
  CHECK(is_flip_m(c, 1));
}

TEST_CASE("equilateral tokens are far apart, so not flip-1") {
  CHECK_FALSE(is_flip_m(gen_equilateral(9), 1));
  CHECK(is_flip_m(gen_equilateral(9), 3));
  CHECK_FALSE(is_flip_m(gen_full(9), 3));
  CHECK(is_flip_m(gen_full(9), 4));
}

TEST_CASE("random generators respect their contracts") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK(gen_random_tokens(21, 5, seed).token_count() == 5);
    CHECK(gen_random_bits(21, seed).token_count() % 2 == 1);
  }
  CHECK(gen_random_bits(21, 3) == gen_random_bits(21, 3));
}

TEST_CASE("invalid input is rejected") {
  CHECK_THROWS_AS(gen_equilateral(10), InvalidInput);
  CHECK_THROWS_AS(gen_full(1), InvalidInput);
  CHECK_THROWS_AS(RingConfig::from_tokens(9, std::vector<int>{1, 4}), InvalidInput);
  CHECK_THROWS_AS(RingConfig::from_tokens(9, std::vector<int>{1, 4, 10}), InvalidInput);
  CHECK_THROWS_AS(parse_config_literal("N=9;bits=01x010010"), InvalidInput);
  CHECK_THROWS_AS(parse_config_literal("tokens=1,2,3"), InvalidInput);
  CHECK_THROWS_AS(gen_flip_m(9, 5, 1), InvalidInput);
  CHECK_THROWS_AS(ProtocolParams::sync(1.0), InvalidInput);
  CHECK_THROWS_AS(ProtocolParams::async(0.0), InvalidInput);
  CHECK(ProtocolParams::sync(0.3).diffusion() == doctest::Approx(0.21));
}

TEST_CASE("rng streams are reproducible and distinct") {
  TrialRng a(7, 3);
  TrialRng b(7, 3);
  TrialRng c(7, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    REQUIRE(x == b.uniform());
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    differs = differs || x != c.uniform();
  }
  CHECK(differs);
  TrialRng d(1, 1);
  for (int i = 0; i < 1000; ++i) REQUIRE(d.below(7) < 7);
}
