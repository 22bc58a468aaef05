#include "fuzzyjoin/error.hpp"

namespace fuzzyjoin {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::EmptyCatalog: return "EmptyCatalog";
    case ErrorCode::TooFewIdentities: return "TooFewIdentities";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyColumn: return "EmptyColumn";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fuzzyjoin
