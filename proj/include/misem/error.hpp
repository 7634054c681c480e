#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace misem {

enum class ErrorCode {
  EmptyDocument,
  EmptySentence,
  EmptySummary,
  EmptyReference,
  ZeroVector,
  DimensionMismatch,
  LengthMismatch,
  NonFiniteInput,
  ProviderUnavailable,
  CacheMiss,
  MalformedCache,
  UnknownTopic,
  InvalidArgument,
  TooFewPoints,
  BadPerplexity,
  Cancelled,
  SchemaError,
  DuplicateSummary,
  ConstantInput,
  InsufficientData,
};

/// Stable upper-snake name used in JSON error bodies, e.g. "EMPTY_SUMMARY".
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace misem
