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

#include <stdexcept>
#include <string>

namespace herman {

/// Base of all library errors. Each subclass maps to one CLI exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept { return 4; }
};

/// Malformed configuration, out-of-range parameter, unparsable spec line.
class InvalidInput : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// A record file is missing a field the consumer needs.
class SchemaError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// State space, term count or series truncation exceeded its budget.
class ResourceError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

/// An engine produced an unusable result (censored trials, starvation, ...).
class EngineError : public Error {
 public:
  using Error::Error;
};

}  // namespace herman
