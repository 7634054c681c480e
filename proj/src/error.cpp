#include "misem/error.hpp"

namespace misem {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDocument: return "EMPTY_DOCUMENT";
    case ErrorCode::EmptySentence: return "EMPTY_SENTENCE";
    case ErrorCode::EmptySummary: return "EMPTY_SUMMARY";
    case ErrorCode::EmptyReference: return "EMPTY_REFERENCE";
    case ErrorCode::ZeroVector: return "ZERO_VECTOR";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::LengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::NonFiniteInput: return "NON_FINITE_INPUT";
    case ErrorCode::ProviderUnavailable: return "PROVIDER_UNAVAILABLE";
    case ErrorCode::CacheMiss: return "CACHE_MISS";
    case ErrorCode::MalformedCache: return "MALFORMED_CACHE";
    case ErrorCode::UnknownTopic: return "UNKNOWN_TOPIC";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::TooFewPoints: return "TOO_FEW_POINTS";
    case ErrorCode::BadPerplexity: return "BAD_PERPLEXITY";
    case ErrorCode::Cancelled: return "CANCELLED";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::DuplicateSummary: return "DUPLICATE_SUMMARY";
    case ErrorCode::ConstantInput: return "CONSTANT_INPUT";
    case ErrorCode::InsufficientData: return "INSUFFICIENT_DATA";
  }
  return "UNKNOWN";
}

}  // namespace misem
