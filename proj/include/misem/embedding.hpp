#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "misem/matrix.hpp"
#include "misem/text_prep.hpp"

namespace misem::embed {

struct ProviderInfo {
  std::string model_name;
  std::size_t dim = 0;
  bool normalized = false;
};

struct ProbeResult {
  bool reachable = false;
  std::string model_name;
  std::size_t dim = 0;
  std::string error;
};

/// Contextual vectors for the tokens of one sentence, as served by a backend.
struct TokenEmbedding {
  std::vector<std::string> tokens;
  Matrix vectors;  // tokens.size() x dim
};

/// Source of sentence and contextual token embeddings. Implementations must be
/// safe for concurrent calls on a const instance.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual ProviderInfo info() const = 0;
  virtual Matrix sentence_vectors(const std::vector<std::string>& texts) const = 0;
  virtual std::vector<TokenEmbedding> token_vectors(
      const std::vector<std::string>& sentences) const = 0;

  /// Cheap reachability check. Local backends are always reachable.
  virtual ProbeResult probe(std::chrono::milliseconds timeout) const;
};

struct IndexedText {
  std::size_t index = 0;
  std::string text;
};

struct EmbeddedReference {
  std::vector<IndexedText> sentences;
  Matrix embeddings;  // one row per sentence
};

struct SummaryToken {
  std::size_t token_index = 0;
  std::string surface;
  std::size_t sentence_index = 0;
  std::optional<text::CharSpan> span;  // byte offsets into the sentence text, when locatable
};

struct EmbeddedSummary {
  std::vector<SummaryToken> tokens;
  Matrix embeddings;  // one row per token
};

struct EmbedOptions {
  bool normalize_sentences = true;
  bool normalize_tokens = true;
  bool drop_punctuation_tokens = false;
  std::optional<std::size_t> expected_dim;
};

EmbeddedReference embed_sentences(const std::vector<std::string>& texts, const Backend& backend,
                                  const EmbedOptions& options = {});

EmbeddedSummary embed_summary_tokens(const std::vector<std::string>& summary_sentences,
                                     const Backend& backend, const EmbedOptions& options = {});

std::vector<double> normalize_l2(std::span<const double> v);
void normalize_rows(Matrix& m);

/// True for sequence-start/end and padding markers that never enter the token set.
bool is_special_marker(std::string_view token);
bool is_punctuation_only(std::string_view token);

std::string sha256_hex(std::string_view text);

}  // namespace misem::embed
