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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace herman {

enum class Variant { synchronous, asynchronous };

/// Protocol variant and its rate parameter.
struct ProtocolParams {
  Variant variant = Variant::synchronous;
  double r = 0.5;       ///< pass probability per step (synchronous)
  double lambda = 1.0;  ///< pass rate (asynchronous)

  static ProtocolParams sync(double r);
  static ProtocolParams async(double lambda);

  /// r(1-r) for the synchronous protocol, lambda for the asynchronous one.
  [[nodiscard]] double diffusion() const;
  [[nodiscard]] bool is_sync() const { return variant == Variant::synchronous; }
  [[nodiscard]] std::string describe() const;
};

/// Collision side of a token pair: down means the lower-indexed token catches
/// up with the other clockwise, up means it is caught from behind.
enum class Direction { down, up };

/// Clockwise inter-token distances, one per consecutive pair, wrapping around.
/// gaps[i] is the distance from token i+1 to token i+2 (1-based token labels).
class GapVector {
 public:
  GapVector(int n, std::vector<int> gaps);

  [[nodiscard]] int ring_size() const { return n_; }
  [[nodiscard]] const std::vector<int>& values() const { return gaps_; }
  [[nodiscard]] std::size_t size() const { return gaps_.size(); }
  [[nodiscard]] int operator[](std::size_t i) const { return gaps_[i]; }
  [[nodiscard]] int sum() const;

  /// z(v) - z(u) for 1-based token labels u < v.
  [[nodiscard]] int pair_distance(int u, int v) const;
  /// z_uv for down, n - z_uv for up.
  [[nodiscard]] int directed_distance(int u, int v, Direction d) const;

 private:
  int n_;
  std::vector<int> gaps_;
};

/// A ring of n processors, each holding one bit. Processor i has a token iff
/// its bit equals the bit of its counterclockwise neighbour i-1 (processor 1's
/// neighbour is n). Positions are 1-based and increase clockwise.
class RingConfig {
 public:
  static RingConfig from_bits(int n, std::span<const std::uint8_t> bits);
  /// Canonical encoding: bit 1 is 0 and later bits follow the token rule.
  static RingConfig from_tokens(int n, std::span<const int> positions);

  [[nodiscard]] int size() const { return n_; }
  [[nodiscard]] int token_count() const { return static_cast<int>(tokens_.size()); }
  /// (M - 1) / 2, the number of pairs in a pairing.
  [[nodiscard]] int half_count() const { return (token_count() - 1) / 2; }
  [[nodiscard]] bool is_legitimate() const { return tokens_.size() == 1; }

  [[nodiscard]] const std::vector<std::uint8_t>& bits() const { return bits_; }
  [[nodiscard]] const std::vector<int>& token_positions() const { return tokens_; }
  [[nodiscard]] bool has_token(int position) const;

  [[nodiscard]] GapVector gaps() const;

  /// "N=9;tokens=1,4,7"
  [[nodiscard]] std::string literal() const;
  /// "N=9;bits=010010010"
  [[nodiscard]] std::string bits_literal() const;

  friend bool operator==(const RingConfig&, const RingConfig&) = default;

 private:
  RingConfig(int n, std::vector<std::uint8_t> bits);

  int n_ = 0;
  std::vector<std::uint8_t> bits_;
  std::vector<int> tokens_;
};

// Free-function views, mirroring the member accessors.
inline const std::vector<int>& token_positions(const RingConfig& c) { return c.token_positions(); }
inline GapVector gaps(const RingConfig& c) { return c.gaps(); }

/// Smallest gap for M >= 3; 0 once fewer than three tokens remain.
int min_token_gap(const RingConfig& c);

/// Clockwise distance from position p to position q on a ring of size n.
inline int clockwise_distance(int n, int p, int q) { return ((q - p) % n + n) % n; }

/// Three tokens with gaps floor(n/3) or ceil(n/3), smallest gap first.
RingConfig gen_equilateral(int n);
/// Every processor holds a token (all bits equal).
RingConfig gen_full(int n);
/// Each bit drawn independently and uniformly.
RingConfig gen_random_bits(int n, std::uint64_t seed);
/// Single token at the given position.
RingConfig gen_legitimate(int n, int position = 1);
/// Legitimate configuration (token at legit_position) with the given bits flipped.
RingConfig gen_flip_m(int n, int m, std::span<const int> flip_positions, int legit_position = 1);
/// As above, with m distinct flip positions drawn uniformly without replacement.
RingConfig gen_flip_m(int n, int m, std::uint64_t seed);
/// Uniformly random set of exactly `tokens` (odd) token positions.
RingConfig gen_random_tokens(int n, int tokens, std::uint64_t seed);

/// True iff M <= 2m+1 and all but one token can be matched into pairs whose
/// ring distance is at most m.
bool is_flip_m(const RingConfig& c, int m);

/// Parses "N=9;tokens=1,4,7" or "N=9;bits=010010010".
RingConfig parse_config_literal(std::string_view text);

/// Parses a comma separated list of integers ("1,4,7").
std::vector<int> parse_int_list(std::string_view text);

}  // namespace herman
