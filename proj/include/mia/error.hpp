#pragma once

#include <stdexcept>
#include <string>

namespace mia {

enum class ErrorCode {
  Ok = 0,
  ZeroVector,
  DimMismatch,
  EmptyDocument,
  EmptySummary,
  OutOfRange,
  CorruptIndex,
  VersionMismatch,
  AlreadySelected,
  EmptyPool,
  PoolTooLarge,
  EmptyIndex,
  EmptyGold,
  EmptySeries,
  MalformedPair,
  MissingPlaceholder,
  UnknownPlaceholder,
  MissingAction,
  InvalidAction,
  MissingRefinement,
  UnparseableAnswer,
  ProviderFailure,
  Timeout,
  ParseError,
  ConfigError,
  IoError,
  InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mia
