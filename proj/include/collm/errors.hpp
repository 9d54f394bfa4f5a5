// Copyright 2026 The CoLLM Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace collm {

/// Base of every error thrown by the toolkit. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, empty inputs, API misuse (e.g. backward without forward).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or architecture requests.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data (labels, ids, dimensions).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Binary file parse failure; `offset()` is the byte position where parsing stopped.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error, message prefixed with the file it came from.
  ParseError in_file(const std::string& path) const { return {path + ": " + detail_, offset_}; }

 private:
  std::string detail_;
  std::size_t offset_;
};

/// A normalization group whose L1 norm is zero.
class DegenerateWeightsError : public DataError {
 public:
  using DataError::DataError;
};

/// Checkpoints that do not share an architecture hash.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace collm
