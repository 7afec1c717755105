// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gcbase {

/// Root of every exception thrown by the library. `exit_code()` is what the
/// command-line tool returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
  int exit_code() const noexcept override { return 2; }
};

class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data"; }
  int exit_code() const noexcept override { return 3; }
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& msg)
      : DataError(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  std::size_t line_;
};

/// A documented invariant of a domain type does not hold.
class InvariantError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invariant"; }
  int exit_code() const noexcept override { return 3; }
};

class ShapeError : public InvariantError {
 public:
  using InvariantError::InvariantError;
  const char* kind() const noexcept override { return "shape"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
  int exit_code() const noexcept override { return 4; }
};

}  // namespace gcbase
