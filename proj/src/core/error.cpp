#include "sage/error.hpp"

namespace sage {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::CorruptRecord: return "CorruptRecord";
    case ErrorCode::NormalizationError: return "NormalizationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InvalidBudget: return "InvalidBudget";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::MissingServerAttention: return "MissingServerAttention";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::MissingPredictions: return "MissingPredictions";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

}  // namespace sage
