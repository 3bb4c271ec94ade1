#pragma once

#include <stdexcept>
#include <string>

namespace asbc {

enum class ErrorCode {
  EmptyInput,
  FormatError,
  InsufficientLength,
  InsufficientData,
  DomainError,
  NumericalError,
  PriorRejectionError,
  ShapeError,
  ConfigError,
  PipelineError,
  IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace asbc
