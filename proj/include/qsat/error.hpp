#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qsat {

enum class ErrorCode {
  // Input parsing and validation.
  MissingColumn,
  UnknownColumn,
  FieldCount,
  NonIntegerScore,
  InvalidScore,
  InvalidSampleSize,
  UnknownDesign,
  MissingDesign,
  InvalidArgument,
  EmptyGroup,
  Validation,
  // Numerics.
  SingularSystem,
  NonConvergence,
  NonFiniteInput,
  NonFiniteLoss,
  WidthMismatch,
  NotFitted,
  // Persistence.
  VersionMismatch,
  MissingModel,
  Schema,
  Io,
  // Anything that failed while fitting a learner.
  FitFailure,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `row` is the 1-based CSV line
/// (header is row 1) and `field` names the offending column, request field,
/// JSON pointer or hyperparameter, whichever applies.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {},
        std::optional<std::size_t> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }
  std::optional<std::size_t> row() const noexcept { return row_; }

  /// True for errors caused by bad user input (CLI exit code 2, HTTP 422).
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
  std::string field_;
  std::optional<std::size_t> row_;
};

}  // namespace qsat
