// Copyright (c) moecache authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace moecache {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration, detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A value violates a data-model invariant (bad set size, out-of-range id, duplicate record).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text. `line()` is 1-based, or 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between a hidden state and a gate.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite arithmetic result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A requested layer or token is not present in the input.
class SelectionError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace moecache
