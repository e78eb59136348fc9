#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace longeval {

enum class ErrorKind {
  Parse,
  Range,
  Duplicate,
  Parameter,
  InsufficientCohort,
  DegeneratePartition,
  UndefinedMetric,
  DegenerateTest,
  Rank,
  Shape,
  NonFinite,
  Divergence,
  Leakage,
  Io,
  Config,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so the CLI can emit a
// machine-readable summary.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Thrown by load_panel; line is 1-based and counts the header row.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& message)
      : Error(kind, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace longeval
