#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace har {

enum class ErrorKind {
  RowWidthMismatch,
  NonNumericToken,
  MissingFile,
  RowCountMismatch,
  UnknownFeature,
  InvalidLabel,
  EmptyInput,
  ShapeMismatch,
  NonFiniteEvaluation,
  DivergenceDetected,
  NotConverged,
  KernelNotSymmetric,
  EmptyNode,
  NonFiniteGradient,
  SearchFailed,
  NonFiniteConfiguration,
  LengthMismatch,
  InvalidCode,
  SchemaViolation,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind so the
// CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace har
