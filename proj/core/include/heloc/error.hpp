#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heloc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed demo-language source. Carries the 1-based position of the offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, int line, int column)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// A tree exceeded one of the configured size limits.
class CapError : public Error {
 public:
  CapError(std::string cap, std::size_t limit, std::size_t actual)
      : Error(cap + " cap exceeded: " + std::to_string(actual) + " > " + std::to_string(limit)),
        cap_(std::move(cap)) {}

  const std::string& cap() const noexcept { return cap_; }

 private:
  std::string cap_;
};

/// Structurally invalid tree (dangling parent, cycle, duplicate id, ...).
class TreeError : public Error {
 public:
  using Error::Error;
};

/// Unreadable serialized input: interchange records, checkpoints, CSV files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not conform, or a stored model disagrees with its configuration.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Training cannot proceed because no objective produces a signal.
class NoSignalError : public Error {
 public:
  using Error::Error;
};

}  // namespace heloc
