#include "misem/embedding.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "misem/error.hpp"

namespace misem::embed {

namespace {

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains non-finite values");
  }
}

void check_dim(const Matrix& m, const ProviderInfo& info, const EmbedOptions& options) {
  if (m.empty()) return;
  if (m.cols() < 2) {
    throw Error(ErrorCode::DimensionMismatch, "embedding dimension must be at least 2");
  }
  if (info.dim != 0 && m.cols() != info.dim) {
    throw Error(ErrorCode::DimensionMismatch, "backend '" + info.model_name + "' reports dim " +
                                                  std::to_string(info.dim) + " but served " +
                                                  std::to_string(m.cols()));
  }
  if (options.expected_dim && m.cols() != *options.expected_dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected dim " + std::to_string(*options.expected_dim) + " but backend '" +
                    info.model_name + "' served " + std::to_string(m.cols()));
  }
}

std::string_view strip_subword_prefix(std::string_view token) {
  for (std::string_view prefix : {"##", "\xC4\xA0", "\xE2\x96\x81"}) {
    if (token.starts_with(prefix) && token.size() > prefix.size()) return token.substr(prefix.size());
  }
  return token;
}

std::size_t find_ascii_icase(std::string_view haystack, std::string_view needle, std::size_t from) {
  if (needle.empty() || needle.size() > haystack.size()) return std::string_view::npos;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
  };
  auto it = std::search(haystack.begin() + static_cast<std::ptrdiff_t>(std::min(from, haystack.size())),
                        haystack.end(), needle.begin(), needle.end(), eq);
  return it == haystack.end() ? std::string_view::npos
                              : static_cast<std::size_t>(it - haystack.begin());
}

}  // namespace

ProbeResult Backend::probe(std::chrono::milliseconds) const {
  const auto i = info();
  return {true, i.model_name, i.dim, {}};
}

std::vector<double> normalize_l2(std::span<const double> v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  if (!std::isfinite(norm)) throw Error(ErrorCode::NonFiniteInput, "vector norm is not finite");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

void normalize_rows(Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto normalized = normalize_l2(m.row(r));
    std::copy(normalized.begin(), normalized.end(), m.row(r).begin());
  }
}

bool is_special_marker(std::string_view token) {
  static constexpr std::array<std::string_view, 8> kMarkers{
      "[CLS]", "[SEP]", "[PAD]", "<s>", "</s>", "<pad>", "<|endoftext|>", "[MASK]"};
  return std::find(kMarkers.begin(), kMarkers.end(), token) != kMarkers.end();
}

bool is_punctuation_only(std::string_view token) {
  token = strip_subword_prefix(token);
  return !token.empty() && std::all_of(token.begin(), token.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
}

std::string sha256_hex(std::string_view text) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

EmbeddedReference embed_sentences(const std::vector<std::string>& texts, const Backend& backend,
                                  const EmbedOptions& options) {
  if (texts.empty()) throw Error(ErrorCode::EmptyReference, "no reference sentences to embed");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::is_blank(texts[i])) {
      throw Error(ErrorCode::EmptySentence, "reference sentence " + std::to_string(i) + " is empty");
    }
  }
  EmbeddedReference out;
  out.embeddings = backend.sentence_vectors(texts);
  if (out.embeddings.rows() != texts.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "backend returned " + std::to_string(out.embeddings.rows()) + " vectors for " +
                    std::to_string(texts.size()) + " sentences");
  }
  check_dim(out.embeddings, backend.info(), options);
  check_finite(out.embeddings, "sentence embeddings");
  if (options.normalize_sentences) normalize_rows(out.embeddings);
  out.sentences.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out.sentences.push_back({i, texts[i]});
  return out;
}

EmbeddedSummary embed_summary_tokens(const std::vector<std::string>& summary_sentences,
                                     const Backend& backend, const EmbedOptions& options) {
  if (summary_sentences.empty()) throw Error(ErrorCode::EmptySummary, "summary has no sentences");
  for (std::size_t i = 0; i < summary_sentences.size(); ++i) {
    if (text::is_blank(summary_sentences[i])) {
      throw Error(ErrorCode::EmptySentence, "summary sentence " + std::to_string(i) + " is empty");
    }
  }
  const auto per_sentence = backend.token_vectors(summary_sentences);
  if (per_sentence.size() != summary_sentences.size()) {
    throw Error(ErrorCode::DimensionMismatch, "backend returned token embeddings for " +
                                                  std::to_string(per_sentence.size()) + " of " +
                                                  std::to_string(summary_sentences.size()) +
                                                  " sentences");
  }
  EmbeddedSummary out;
  for (std::size_t s = 0; s < per_sentence.size(); ++s) {
    const auto& te = per_sentence[s];
    if (te.tokens.size() != te.vectors.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "sentence " + std::to_string(s) + " has " +
                                                    std::to_string(te.tokens.size()) +
                                                    " tokens but " +
                                                    std::to_string(te.vectors.rows()) + " vectors");
    }
    const std::string_view sentence = summary_sentences[s];
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < te.tokens.size(); ++t) {
      const std::string& surface = te.tokens[t];
      if (is_special_marker(surface)) continue;
      if (options.drop_punctuation_tokens && is_punctuation_only(surface)) continue;
      SummaryToken token;
      token.token_index = out.tokens.size();
      token.surface = surface;
      token.sentence_index = s;
      const auto needle = strip_subword_prefix(surface);
      if (const auto at = find_ascii_icase(sentence, needle, cursor); at != std::string_view::npos) {
        token.span = text::CharSpan{at, at + needle.size()};
        cursor = at + needle.size();
      }
      out.tokens.push_back(std::move(token));
      out.embeddings.append_row(te.vectors.row(t));
    }
  }
  if (out.tokens.empty()) throw Error(ErrorCode::EmptySummary, "summary produced no tokens");
  check_dim(out.embeddings, backend.info(), options);
  check_finite(out.embeddings, "token embeddings");
  if (options.normalize_tokens) normalize_rows(out.embeddings);
  return out;
}

}  // namespace misem::embed
