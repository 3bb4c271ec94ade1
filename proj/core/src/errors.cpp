#include "asbc/errors.hpp"

namespace asbc {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::InsufficientLength: return "InsufficientLength";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::PriorRejectionError: return "PriorRejectionError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::PipelineError: return "PipelineError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace asbc
