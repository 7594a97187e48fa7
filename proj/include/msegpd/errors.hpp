#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msegpd {

// Argument outside the mathematical domain of an operation (negative amount,
// probability outside [0, 1), non-positive scale, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A documented precondition between arguments does not hold.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Observed data inconsistent with the model lattice or bookkeeping.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file could not be parsed. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A probability query reaches past the mass materialized on the lattice.
class InsufficientSupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace msegpd
