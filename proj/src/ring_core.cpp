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

#include "herman/ring_core.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "herman/error.hpp"
#include "herman/rng.hpp"

namespace herman {

namespace {

void require_odd_ring(int n) {
  if (n < 3 || n % 2 == 0) {
    throw InvalidInput("ring size must be odd and at least 3, got " + std::to_string(n));
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s) {
  s = trim(s);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InvalidInput("not an integer: '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

ProtocolParams ProtocolParams::sync(double r) {
  if (!(r > 0.0 && r < 1.0)) {
    throw InvalidInput("synchronous pass probability must lie in (0,1), got " + std::to_string(r));
  }
  return {Variant::synchronous, r, 1.0};
}

ProtocolParams ProtocolParams::async(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput("asynchronous pass rate must be positive, got " + std::to_string(lambda));
  }
  return {Variant::asynchronous, 0.5, lambda};
}

double ProtocolParams::diffusion() const { return is_sync() ? r * (1.0 - r) : lambda; }

std::string ProtocolParams::describe() const {
  std::ostringstream os;
  if (is_sync()) {
    os << "sync(r=" << r << ")";
  } else {
    os << "async(lambda=" << lambda << ")";
  }
  return os.str();
}

GapVector::GapVector(int n, std::vector<int> gaps) : n_(n), gaps_(std::move(gaps)) {}

int GapVector::sum() const { return std::accumulate(gaps_.begin(), gaps_.end(), 0); }

int GapVector::pair_distance(int u, int v) const {
  const int count = static_cast<int>(gaps_.size());
  if (u < 1 || v > count || u >= v) {
    throw InvalidInput("token labels must satisfy 1 <= u < v <= M");
  }
  return std::accumulate(gaps_.begin() + (u - 1), gaps_.begin() + (v - 1), 0);
}

int GapVector::directed_distance(int u, int v, Direction d) const {
  const int z = pair_distance(u, v);
  return d == Direction::down ? z : n_ - z;
}

RingConfig::RingConfig(int n, std::vector<std::uint8_t> bits) : n_(n), bits_(std::move(bits)) {
  for (int i = 1; i <= n_; ++i) {
    const int prev = i == 1 ? n_ : i - 1;
    if (bits_[i - 1] == bits_[prev - 1]) tokens_.push_back(i);
  }
  if (tokens_.size() % 2 == 0) {
    // Unreachable for odd n: the number of unequal neighbour pairs is even.
    throw InvalidInput("token count must be odd");
  }
}

RingConfig RingConfig::from_bits(int n, std::span<const std::uint8_t> bits) {
  require_odd_ring(n);
  if (static_cast<int>(bits.size()) != n) {
    throw InvalidInput("bit vector has length " + std::to_string(bits.size()) + ", expected " +
                       std::to_string(n));
  }
  std::vector<std::uint8_t> normalized(bits.begin(), bits.end());
  for (auto& b : normalized) {
    if (b > 1) throw InvalidInput("bits must be 0 or 1");
  }
  return RingConfig(n, std::move(normalized));
}

RingConfig RingConfig::from_tokens(int n, std::span<const int> positions) {
  require_odd_ring(n);
  if (positions.empty() || positions.size() % 2 == 0) {
    throw InvalidInput("token count must be odd, got " + std::to_string(positions.size()));
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 1 || positions[i] > n) {
      throw InvalidInput("token position out of range 1.." + std::to_string(n));
    }
    if (i > 0 && positions[i] <= positions[i - 1]) {
      throw InvalidInput("token positions must be strictly increasing");
    }
  }
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  std::vector<bool> token(static_cast<std::size_t>(n) + 1, false);
  for (int p : positions) token[static_cast<std::size_t>(p)] = true;
  bits[0] = 0;
  for (int i = 2; i <= n; ++i) {
    bits[i - 1] = token[static_cast<std::size_t>(i)] ? bits[i - 2] : static_cast<std::uint8_t>(1 - bits[i - 2]);
  }
  return RingConfig(n, std::move(bits));
}

bool RingConfig::has_token(int position) const {
  return std::binary_search(tokens_.begin(), tokens_.end(), position);
}

GapVector RingConfig::gaps() const {
  std::vector<int> g;
  const auto count = tokens_.size();
  g.reserve(count);
  if (count == 1) {
    g.push_back(n_);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      g.push_back(clockwise_distance(n_, tokens_[i], tokens_[(i + 1) % count]));
    }
  }
  return GapVector(n_, std::move(g));
}

std::string RingConfig::literal() const {
  std::string out = "N=" + std::to_string(n_) + ";tokens=";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(tokens_[i]);
  }
  return out;
}

std::string RingConfig::bits_literal() const {
  std::string out = "N=" + std::to_string(n_) + ";bits=";
  for (auto b : bits_) out += static_cast<char>('0' + b);
  return out;
}

int min_token_gap(const RingConfig& c) {
  if (c.token_count() < 3) return 0;
  const auto g = c.gaps();
  return *std::min_element(g.values().begin(), g.values().end());
}

RingConfig gen_equilateral(int n) {
  require_odd_ring(n);
  const int small = n / 3;
  const int larger = n - 3 * small;  // how many gaps get the extra processor
  std::vector<int> gaps(3, small);
  for (int i = 0; i < larger; ++i) gaps[2 - i] += 1;
  const std::vector<int> positions{1, 1 + gaps[0], 1 + gaps[0] + gaps[1]};
  return RingConfig::from_tokens(n, positions);
}

RingConfig gen_full(int n) {
  require_odd_ring(n);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n), 0);
  return RingConfig::from_bits(n, bits);
}

RingConfig gen_random_bits(int n, std::uint64_t seed) {
  require_odd_ring(n);
  TrialRng rng(seed, 0);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
  for (auto& b : bits) b = static_cast<std::uint8_t>(rng.below(2));
  return RingConfig::from_bits(n, bits);
}

RingConfig gen_legitimate(int n, int position) {
  const std::vector<int> positions{position};
  return RingConfig::from_tokens(n, positions);
}

RingConfig gen_flip_m(int n, int m, std::span<const int> flip_positions, int legit_position) {
  require_odd_ring(n);
  if (m < 0 || 2 * m + 1 > n) {
    throw InvalidInput("flip-m requires 0 <= m and 2m+1 <= n");
  }
  if (static_cast<int>(flip_positions.size()) != m) {
    throw InvalidInput("expected exactly " + std::to_string(m) + " flip positions");
  }
  std::vector<int> sorted(flip_positions.begin(), flip_positions.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidInput("flip positions must be distinct");
  }
  auto bits = gen_legitimate(n, legit_position).bits();
  for (int p : sorted) {
    if (p < 1 || p > n) throw InvalidInput("flip position out of range");
    bits[static_cast<std::size_t>(p - 1)] ^= 1U;
  }
  return RingConfig::from_bits(n, bits);
}

RingConfig gen_flip_m(int n, int m, std::uint64_t seed) {
  require_odd_ring(n);
  if (m < 0 || 2 * m + 1 > n) {
    throw InvalidInput("flip-m requires 0 <= m and 2m+1 <= n");
  }
  // Partial Fisher-Yates: first m entries are a uniform m-subset.
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 1);
  TrialRng rng(seed, 0);
  for (int i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(m));
  return gen_flip_m(n, m, pool);
}

RingConfig gen_random_tokens(int n, int tokens, std::uint64_t seed) {
  require_odd_ring(n);
  if (tokens < 1 || tokens > n || tokens % 2 == 0) {
    throw InvalidInput("token count must be odd and within 1..n");
  }
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 1);
  TrialRng rng(seed, 0);
  for (int i = 0; i < tokens; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(tokens));
  std::sort(pool.begin(), pool.end());
  return RingConfig::from_tokens(n, pool);
}

bool is_flip_m(const RingConfig& c, int m) {
  if (m < 0) return false;
  const int count = c.token_count();
  if (count > 2 * m + 1) return false;
  if (count == 1) return true;

  const int n = c.size();
  const auto& pos = c.token_positions();
  auto ring_distance = [n](int p, int q) {
    const int d = clockwise_distance(n, p, q);
    return std::min(d, n - d);
  };

  // Exhaustive search: choose the leftover, then match the lowest unmatched
  // token with every admissible partner.
  std::vector<bool> used(static_cast<std::size_t>(count), false);
  std::function<bool(int)> match = [&](int remaining) -> bool {
    if (remaining == 0) return true;
    int first = 0;
    while (used[static_cast<std::size_t>(first)]) ++first;
    used[static_cast<std::size_t>(first)] = true;
    for (int other = first + 1; other < count; ++other) {
      if (used[static_cast<std::size_t>(other)]) continue;
      if (ring_distance(pos[static_cast<std::size_t>(first)], pos[static_cast<std::size_t>(other)]) > m) continue;
      used[static_cast<std::size_t>(other)] = true;
      if (match(remaining - 2)) return true;
      used[static_cast<std::size_t>(other)] = false;
    }
    used[static_cast<std::size_t>(first)] = false;
    return false;
  };

  for (int leftover = 0; leftover < count; ++leftover) {
    std::fill(used.begin(), used.end(), false);
    used[static_cast<std::size_t>(leftover)] = true;
    if (match(count - 1)) return true;
  }
  return false;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? text.npos : comma - start);
    out.push_back(parse_int(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

RingConfig parse_config_literal(std::string_view text) {
  int n = -1;
  std::optional<std::string> tokens;
  std::optional<std::string> bits;
  std::size_t start = 0;
  text = trim(text);
  while (start < text.size()) {
    const auto semi = text.find(';', start);
    const auto field = trim(text.substr(start, semi == text.npos ? text.npos : semi - start));
    start = semi == text.npos ? text.size() : semi + 1;
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == field.npos) throw InvalidInput("config field without '=': " + std::string(field));
    const auto key = trim(field.substr(0, eq));
    const auto value = trim(field.substr(eq + 1));
    if (key == "N" || key == "n") {
      n = parse_int(value);
    } else if (key == "tokens") {
      tokens = std::string(value);
    } else if (key == "bits") {
      bits = std::string(value);
    } else {
      throw InvalidInput("unknown config field '" + std::string(key) + "'");
    }
  }
  if (n < 0) throw InvalidInput("config literal lacks N=...");
  if (tokens.has_value() == bits.has_value()) {
    throw InvalidInput("config literal needs exactly one of tokens=... or bits=...");
  }
  if (tokens) {
    const auto positions = parse_int_list(*tokens);
    return RingConfig::from_tokens(n, positions);
  }
  std::vector<std::uint8_t> b;
  for (char ch : *bits) {
    if (ch != '0' && ch != '1') throw InvalidInput("bits must be a 0/1 string");
    b.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  return RingConfig::from_bits(n, b);
}

}  // namespace herman
