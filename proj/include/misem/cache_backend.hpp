#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "misem/embedding.hpp"

namespace misem::embed {

enum class CacheKind { Sentence, Tokens };

struct CacheItem {
  std::string key;  // sha256 hex of text
  CacheKind kind = CacheKind::Sentence;
  std::string text;
  std::vector<std::string> tokens;  // only for CacheKind::Tokens
  std::vector<std::vector<double>> vectors;
};

/// Serves embeddings from a JSON cache file keyed by the SHA-256 of the exact sentence text.
class CacheBackend final : public Backend {
 public:
  CacheBackend(ProviderInfo info, std::vector<CacheItem> items);

  ProviderInfo info() const override { return info_; }
  Matrix sentence_vectors(const std::vector<std::string>& texts) const override;
  std::vector<TokenEmbedding> token_vectors(
      const std::vector<std::string>& sentences) const override;

  const std::vector<CacheItem>& items() const { return items_; }

 private:
  const CacheItem& lookup(const std::string& text, CacheKind kind) const;

  ProviderInfo info_;
  std::vector<CacheItem> items_;
  std::unordered_map<std::string, std::size_t> sentence_index_;
  std::unordered_map<std::string, std::size_t> token_index_;
};

CacheBackend load_embedding_cache(const std::filesystem::path& path);
CacheBackend parse_embedding_cache(const std::string& contents);

void write_embedding_cache(const ProviderInfo& info, const std::vector<CacheItem>& items,
                           const std::filesystem::path& path);
std::string serialize_embedding_cache(const ProviderInfo& info,
                                      const std::vector<CacheItem>& items);

/// Queries `backend` for every text and packages the answers as cache items.
std::vector<CacheItem> collect_cache_items(const Backend& backend,
                                           const std::vector<std::string>& sentence_texts,
                                           const std::vector<std::string>& token_texts);

}  // namespace misem::embed
