#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "misem/embedding.hpp"

namespace misem::embed {

struct HttpBackendOptions {
  std::size_t max_in_flight = 4;
  std::size_t batch_size = 32;
  std::chrono::milliseconds timeout{30000};
};

/// Client for the embedding sidecar:
///   GET  /v1/info             -> {model, dim, normalized}
///   POST /v1/embed/sentences  {texts} -> {dim, vectors}
///   POST /v1/embed/tokens     {text}  -> {tokens, vectors}
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(std::string base_url, HttpBackendOptions options = {});

  ProviderInfo info() const override;
  Matrix sentence_vectors(const std::vector<std::string>& texts) const override;
  std::vector<TokenEmbedding> token_vectors(
      const std::vector<std::string>& sentences) const override;
  ProbeResult probe(std::chrono::milliseconds timeout) const override;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string post_json(const std::string& path, const std::string& body) const;

  std::string base_url_;
  std::string host_;      // scheme://host:port
  std::string prefix_;    // path prefix, no trailing slash
  HttpBackendOptions options_;
  mutable std::mutex info_mutex_;
  mutable std::optional<ProviderInfo> info_;
};

}  // namespace misem::embed
