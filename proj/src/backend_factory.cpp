#include "misem/backend_factory.hpp"

#include <charconv>

#include "misem/cache_backend.hpp"
#include "misem/error.hpp"
#include "misem/http_backend.hpp"
#include "misem/mock_backend.hpp"

namespace misem::embed {

namespace {

struct ParsedSpec {
  std::string kind;
  std::string rest;
};

ParsedSpec split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "embedder spec must be mock:<seed>, cache:<path> or http:<url>, got '" + spec + "'");
  }
  ParsedSpec parsed{spec.substr(0, colon), spec.substr(colon + 1)};
  if (parsed.kind != "mock" && parsed.kind != "cache" && parsed.kind != "http") {
    throw Error(ErrorCode::InvalidArgument, "unknown embedder kind '" + parsed.kind + "'");
  }
  if (parsed.rest.empty()) {
    throw Error(ErrorCode::InvalidArgument, "embedder spec '" + spec + "' has no argument");
  }
  return parsed;
}

std::uint64_t parse_uint(const std::string& s, const std::string& spec) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad number '" + s + "' in embedder spec '" + spec + "'");
  }
  return value;
}

}  // namespace

void validate_backend_spec(const std::string& spec) {
  const auto parsed = split_spec(spec);
  if (parsed.kind == "mock") {
    const auto colon = parsed.rest.find(':');
    parse_uint(parsed.rest.substr(0, colon), spec);
    if (colon != std::string::npos && parse_uint(parsed.rest.substr(colon + 1), spec) < 2) {
      throw Error(ErrorCode::InvalidArgument, "mock embedding dim must be at least 2");
    }
  }
}

std::unique_ptr<Backend> make_backend(const std::string& spec) {
  validate_backend_spec(spec);
  const auto parsed = split_spec(spec);
  if (parsed.kind == "mock") {
    const auto colon = parsed.rest.find(':');
    const auto seed = parse_uint(parsed.rest.substr(0, colon), spec);
    const auto dim = colon == std::string::npos ? MockBackend::kDefaultDim
                                                : parse_uint(parsed.rest.substr(colon + 1), spec);
    return std::make_unique<MockBackend>(seed, dim);
  }
  if (parsed.kind == "cache") {
    return std::make_unique<CacheBackend>(load_embedding_cache(parsed.rest));
  }
  return std::make_unique<HttpBackend>(parsed.rest);
}

}  // namespace misem::embed
