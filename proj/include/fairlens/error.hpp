/*
 * Copyright 2026 The FairLens Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
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

namespace fairlens {

// Base of every error raised by the library. Subclasses map onto the CLI
// exit-code contract (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

// Invalid hyperparameters, specs or config documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape mismatch between matrices, nets and data.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or non-finite input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// A file could not be parsed. Message names the file and the line.
class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

// API misuse, e.g. a backward pass against a stale forward cache.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Bias with respect to a constant attribute is undefined.
class DegenerateAttributeError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Non-finite loss during training. The concrete trace type lives with the
// trainer; see mine::TrainingDivergedError.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace fairlens
