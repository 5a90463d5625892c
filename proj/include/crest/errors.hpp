#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crest {

/// Rejected argument or configuration value.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Carries the 1-based line that failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(long step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  [[nodiscard]] long step() const { return step_; }

 private:
  long step_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crest
