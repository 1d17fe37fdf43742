#include "qsat/error.hpp"

namespace qsat {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::FieldCount: return "FieldCount";
    case ErrorCode::NonIntegerScore: return "NonIntegerScore";
    case ErrorCode::InvalidScore: return "InvalidScore";
    case ErrorCode::InvalidSampleSize: return "InvalidSampleSize";
    case ErrorCode::UnknownDesign: return "UnknownDesign";
    case ErrorCode::MissingDesign: return "MissingDesign";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::Validation: return "Validation";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::Io: return "Io";
    case ErrorCode::FitFailure: return "FitFailure";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     const std::string& field, std::optional<std::size_t> row) {
  std::string out(to_string(code));
  if (row || !field.empty()) {
    out += '(';
    if (row) out += "row " + std::to_string(*row);
    if (row && !field.empty()) out += ", ";
    out += field;
    out += ')';
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string message, std::string field,
             std::optional<std::size_t> row)
    : std::runtime_error(decorate(code, message, field, row)),
      code_(code),
      field_(std::move(field)),
      row_(row) {}

bool Error::is_validation() const noexcept {
  switch (code_) {
    case ErrorCode::MissingColumn:
    case ErrorCode::UnknownColumn:
    case ErrorCode::FieldCount:
    case ErrorCode::NonIntegerScore:
    case ErrorCode::InvalidScore:
    case ErrorCode::InvalidSampleSize:
    case ErrorCode::UnknownDesign:
    case ErrorCode::MissingDesign:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyGroup:
    case ErrorCode::Validation:
    case ErrorCode::VersionMismatch:
    case ErrorCode::MissingModel:
    case ErrorCode::Schema:
    case ErrorCode::Io:
      return true;
    default:
      return false;
  }
}

}  // namespace qsat
