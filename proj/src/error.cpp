#include "mia/error.hpp"

namespace mia {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::EmptySummary: return "EmptySummary";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::CorruptIndex: return "CorruptIndex";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::AlreadySelected: return "AlreadySelected";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::PoolTooLarge: return "PoolTooLarge";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::EmptyGold: return "EmptyGold";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::MalformedPair: return "MalformedPair";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::UnknownPlaceholder: return "UnknownPlaceholder";
    case ErrorCode::MissingAction: return "MissingAction";
    case ErrorCode::InvalidAction: return "InvalidAction";
    case ErrorCode::MissingRefinement: return "MissingRefinement";
    case ErrorCode::UnparseableAnswer: return "UnparseableAnswer";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace mia
