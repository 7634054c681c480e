#include "misem/mock_backend.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <random>

#include "misem/error.hpp"

namespace misem::embed {

namespace {

constexpr double kSelfWeight = 0.7;
constexpr double kNeighbourWeight = 0.15;
constexpr std::string_view kStartMarker = "<s>";
constexpr std::string_view kEndMarker = "</s>";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in (0, 1].
double unit_interval(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

MockBackend::MockBackend(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
  if (dim_ < 2) throw Error(ErrorCode::InvalidArgument, "mock embedding dim must be at least 2");
}

ProviderInfo MockBackend::info() const {
  return {"mock-" + std::to_string(seed_), dim_, true};
}

std::vector<double> MockBackend::hash_vector(std::string_view token) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(fnv1a(token)),
                    static_cast<std::uint32_t>(fnv1a(token) >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<double> v(dim_);
  // Box-Muller, two normals per pair of uniforms.
  for (std::size_t i = 0; i < dim_; i += 2) {
    const double radius = std::sqrt(-2.0 * std::log(unit_interval(rng)));
    const double angle = 2.0 * std::numbers::pi * unit_interval(rng);
    v[i] = radius * std::cos(angle);
    if (i + 1 < dim_) v[i + 1] = radius * std::sin(angle);
  }
  return v;
}

std::vector<std::string> MockBackend::whitespace_tokens(std::string_view sentence) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
    if (j > i) tokens.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  return tokens;
}

TokenEmbedding MockBackend::embed_sentence_tokens(const std::string& sentence) const {
  TokenEmbedding out;
  out.tokens = whitespace_tokens(sentence);
  if (out.tokens.empty()) throw Error(ErrorCode::EmptySentence, "sentence has no tokens");
  const std::size_t n = out.tokens.size();
  std::vector<std::vector<double>> base;
  base.reserve(n);
  for (const auto& t : out.tokens) base.push_back(hash_vector(t));
  const auto start = hash_vector(kStartMarker);
  const auto end = hash_vector(kEndMarker);
  out.vectors = Matrix(n, dim_);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& prev = i == 0 ? start : base[i - 1];
    const auto& next = i + 1 == n ? end : base[i + 1];
    std::vector<double> mixed(dim_);
    for (std::size_t d = 0; d < dim_; ++d) {
      mixed[d] = kSelfWeight * base[i][d] + kNeighbourWeight * prev[d] + kNeighbourWeight * next[d];
    }
    const auto unit = normalize_l2(mixed);
    std::copy(unit.begin(), unit.end(), out.vectors.row(i).begin());
  }
  return out;
}

Matrix MockBackend::sentence_vectors(const std::vector<std::string>& texts) const {
  Matrix out(texts.size(), dim_);
  for (std::size_t s = 0; s < texts.size(); ++s) {
    const auto tokens = embed_sentence_tokens(texts[s]);
    std::vector<double> mean(dim_, 0.0);
    for (std::size_t r = 0; r < tokens.vectors.rows(); ++r) {
      for (std::size_t d = 0; d < dim_; ++d) mean[d] += tokens.vectors(r, d);
    }
    for (double& x : mean) x /= static_cast<double>(tokens.vectors.rows());
    const auto unit = normalize_l2(mean);
    std::copy(unit.begin(), unit.end(), out.row(s).begin());
  }
  return out;
}

std::vector<TokenEmbedding> MockBackend::token_vectors(
    const std::vector<std::string>& sentences) const {
  std::vector<TokenEmbedding> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(embed_sentence_tokens(s));
  return out;
}

}  // namespace misem::embed
