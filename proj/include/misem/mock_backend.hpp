#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "misem/embedding.hpp"

namespace misem::embed {

/// Deterministic stand-in for a contextual encoder. Tokens are whitespace-separated
/// words; each token vector is the normalized mix 0.7*h(token) + 0.15*h(prev) + 0.15*h(next)
/// of seeded hash-derived Gaussian draws, and a sentence vector is the normalized mean
/// of its token vectors.
class MockBackend final : public Backend {
 public:
  static constexpr std::size_t kDefaultDim = 64;

  explicit MockBackend(std::uint64_t seed = 42, std::size_t dim = kDefaultDim);

  ProviderInfo info() const override;
  Matrix sentence_vectors(const std::vector<std::string>& texts) const override;
  std::vector<TokenEmbedding> token_vectors(
      const std::vector<std::string>& sentences) const override;

  /// Seeded Gaussian draw for a token surface string (not normalized).
  std::vector<double> hash_vector(std::string_view token) const;

  TokenEmbedding embed_sentence_tokens(const std::string& sentence) const;

  static std::vector<std::string> whitespace_tokens(std::string_view sentence);

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

}  // namespace misem::embed
