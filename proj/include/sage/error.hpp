#pragma once

#include <stdexcept>
#include <string>

namespace sage {

// Values are stable: they double as the C API status codes.
enum class ErrorCode : int {
  Ok = 0,
  BadMagic = 1,
  VersionUnsupported = 2,
  CorruptRecord = 3,
  NormalizationError = 4,
  IoError = 5,
  HeaderMismatch = 6,
  InvalidParams = 7,
  PlacementFailure = 8,
  EmptySelection = 9,
  DomainError = 10,
  InvalidBudget = 11,
  ShapeMismatch = 12,
  EmptySet = 13,
  DegenerateInput = 14,
  MissingServerAttention = 15,
  InvalidProfile = 16,
  MissingPredictions = 17,
  InvalidConfig = 18,
  InvalidArgument = 19,
  Internal = 20,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sage
