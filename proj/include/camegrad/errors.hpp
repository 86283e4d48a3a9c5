#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace camegrad {

// Malformed input text (gradient files, configs, CSV logs). `line` is 1-based,
// 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Violated type or operation invariant (bad hyperparameter, non-finite value...).
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvariantError {
 public:
  DimensionMismatch(std::size_t lhs, std::size_t rhs)
      : InvariantError("dimension mismatch: " + std::to_string(lhs) + " vs " +
                       std::to_string(rhs)) {}
};

}  // namespace camegrad
