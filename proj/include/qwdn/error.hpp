#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qwdn {

// Base for every error raised by the library. Categories map onto CLI exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed INP text. Line and column are 1-based; column 0 means "whole line".
class ParseError : public Error {
public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

// Network violates a structural invariant (unknown node, disconnected, ...).
class NetworkError : public Error {
public:
  using Error::Error;
};

// Numerical breakdown: singular matrices, non-finite residuals, zero-probability projections.
class NumericalError : public Error {
public:
  using Error::Error;
};

// A linear-solver backend failed inside a Newton iteration.
class BackendError : public Error {
public:
  BackendError(std::size_t iteration, const std::string& what)
      : Error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

private:
  std::size_t iteration_;
};

class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace qwdn
