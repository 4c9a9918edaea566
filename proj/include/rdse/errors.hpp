#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rdse {

/// Malformed input text; `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Structurally valid input that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky breakdown. `pivot()` is the 1-based index of the first non-positive pivot.
class DecompositionError : public std::runtime_error {
 public:
  explicit DecompositionError(std::size_t pivot)
      : std::runtime_error("matrix not positive definite at pivot " + std::to_string(pivot)), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Fixed-point iteration hit its cap without meeting the tolerance.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int iterations, double relative_change)
      : std::runtime_error("fixed-point iteration did not converge after " + std::to_string(iterations) +
                           " iterations (last relative change " + std::to_string(relative_change) + ")"),
        iterations_(iterations),
        relative_change_(relative_change) {}
  int iterations() const noexcept { return iterations_; }
  double relative_change() const noexcept { return relative_change_; }

 private:
  int iterations_;
  double relative_change_;
};

/// Any failure inside one filter step, tagged with the step index.
class FilterStepError : public std::runtime_error {
 public:
  FilterStepError(int step, const std::string& why)
      : std::runtime_error("filter step " + std::to_string(step) + ": " + why), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace rdse
