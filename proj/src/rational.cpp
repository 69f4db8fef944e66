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

#include "herman/rational.hpp"

#include <cctype>
#include <string>

#include "herman/error.hpp"

namespace herman {

Rational parse_rational(std::string_view text) {
  std::string s(text);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  if (s.empty()) throw InvalidInput("empty number");

  try {
    if (s.find('/') != std::string::npos) {
      Rational q(s);
      q.canonicalize();
      if (q.get_den() == 0) throw InvalidInput("zero denominator");
      return q;
    }

    // Decimal with optional exponent: mantissa digits over a power of ten.
    std::string mantissa = s;
    long exponent = 0;
    if (const auto e = s.find_first_of("eE"); e != std::string::npos) {
      mantissa = s.substr(0, e);
      exponent = std::stol(s.substr(e + 1));
    }
    bool negative = false;
    if (!mantissa.empty() && (mantissa[0] == '-' || mantissa[0] == '+')) {
      negative = mantissa[0] == '-';
      mantissa.erase(mantissa.begin());
    }
    std::string digits;
    long frac_digits = 0;
    bool seen_point = false;
    for (char ch : mantissa) {
      if (ch == '.') {
        if (seen_point) throw InvalidInput("malformed number: " + s);
        seen_point = true;
      } else if (std::isdigit(static_cast<unsigned char>(ch))) {
        digits += ch;
        if (seen_point) ++frac_digits;
      } else {
        throw InvalidInput("malformed number: " + s);
      }
    }
    if (digits.empty()) throw InvalidInput("malformed number: " + s);
    mpz_class num(digits);
    mpz_class den = 1;
    const long shift = exponent - frac_digits;
    mpz_class ten = 10;
    mpz_class power;
    mpz_pow_ui(power.get_mpz_t(), ten.get_mpz_t(), static_cast<unsigned long>(shift < 0 ? -shift : shift));
    if (shift < 0) {
      den = power;
    } else {
      num *= power;
    }
    Rational q(num, den);
    q.canonicalize();
    return negative ? Rational(-q) : q;
  } catch (const std::invalid_argument&) {
    throw InvalidInput("malformed number: " + s);
  } catch (const std::out_of_range&) {
    throw InvalidInput("number out of range: " + s);
  }
}

}  // namespace herman
