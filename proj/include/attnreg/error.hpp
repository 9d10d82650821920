#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attnreg {

enum class ErrorKind {
  NonSymmetric,
  SingularGram,
  DimensionMismatch,
  RankOutOfRange,
  DegenerateRow,
  OptimizationFailed,
  LineSearchFailure,
  NonFiniteObjective,
  DegenerateSignal,
  DegenerateLag,
  DegenerateMask,
  DegenerateTarget,
  InvalidArgument,
  ParseError,
  NonNumericColumn,
  MissingTarget,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Every library failure surfaces as this exception; `kind()` lets callers
// branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace attnreg
