#include "misem/cache_backend.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "misem/error.hpp"

namespace misem::embed {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::MalformedCache, "malformed embedding cache: " + where + ": " + what);
}

const json& require(const json& obj, const char* field, const std::string& where) {
  if (!obj.is_object()) malformed(where, "expected an object");
  auto it = obj.find(field);
  if (it == obj.end()) malformed(where, std::string("missing field '") + field + "'");
  return *it;
}

std::vector<std::vector<double>> parse_vectors(const json& j, const std::string& where) {
  if (!j.is_array()) malformed(where, "expected an array of vectors");
  std::vector<std::vector<double>> out;
  out.reserve(j.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto& row = j[r];
    const std::string row_where = where + "[" + std::to_string(r) + "]";
    if (!row.is_array()) malformed(row_where, "expected an array of numbers");
    std::vector<double> v;
    v.reserve(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!row[c].is_number()) malformed(row_where + "[" + std::to_string(c) + "]", "expected a number");
      v.push_back(row[c].get<double>());
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::size_t line_of_offset(const std::string& s, std::size_t offset) {
  offset = std::min(offset, s.size());
  return 1 + static_cast<std::size_t>(std::count(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

}  // namespace

CacheBackend::CacheBackend(ProviderInfo info, std::vector<CacheItem> items)
    : info_(std::move(info)), items_(std::move(items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    auto& index = items_[i].kind == CacheKind::Sentence ? sentence_index_ : token_index_;
    index.emplace(items_[i].key, i);
  }
}

const CacheItem& CacheBackend::lookup(const std::string& text, CacheKind kind) const {
  const auto key = sha256_hex(text);
  const auto& index = kind == CacheKind::Sentence ? sentence_index_ : token_index_;
  auto it = index.find(key);
  if (it == index.end()) {
    throw Error(ErrorCode::CacheMiss,
                std::string("embedding cache has no ") +
                    (kind == CacheKind::Sentence ? "sentence" : "tokens") + " entry for key " + key);
  }
  return items_[it->second];
}

Matrix CacheBackend::sentence_vectors(const std::vector<std::string>& texts) const {
  Matrix out;
  for (const auto& t : texts) {
    const auto& item = lookup(t, CacheKind::Sentence);
    if (item.vectors.size() != 1) {
      throw Error(ErrorCode::MalformedCache, "sentence entry " + item.key + " must hold exactly one vector");
    }
    out.append_row(item.vectors.front());
  }
  return out;
}

std::vector<TokenEmbedding> CacheBackend::token_vectors(
    const std::vector<std::string>& sentences) const {
  std::vector<TokenEmbedding> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    const auto& item = lookup(s, CacheKind::Tokens);
    out.push_back({item.tokens, Matrix::from_rows(item.vectors)});
  }
  return out;
}

CacheBackend parse_embedding_cache(const std::string& contents) {
  json doc;
  try {
    doc = json::parse(contents);
  } catch (const json::parse_error& e) {
    malformed("line " + std::to_string(line_of_offset(contents, e.byte)), e.what());
  }
  ProviderInfo info;
  try {
    info.model_name = require(doc, "model", "$").get<std::string>();
    info.dim = require(doc, "dim", "$").get<std::size_t>();
    info.normalized = require(doc, "normalized", "$").get<bool>();
  } catch (const json::type_error& e) {
    malformed("$", e.what());
  }
  const auto& items_json = require(doc, "items", "$");
  if (!items_json.is_array()) malformed("$.items", "expected an array");

  std::vector<CacheItem> items;
  items.reserve(items_json.size());
  for (std::size_t i = 0; i < items_json.size(); ++i) {
    const std::string where = "$.items[" + std::to_string(i) + "]";
    const auto& j = items_json[i];
    CacheItem item;
    try {
      item.key = require(j, "key", where).get<std::string>();
      item.text = require(j, "text", where).get<std::string>();
      const auto kind = require(j, "kind", where).get<std::string>();
      if (kind == "sentence") {
        item.kind = CacheKind::Sentence;
      } else if (kind == "tokens") {
        item.kind = CacheKind::Tokens;
        item.tokens = require(j, "tokens", where).get<std::vector<std::string>>();
      } else {
        malformed(where + ".kind", "expected \"sentence\" or \"tokens\", got \"" + kind + "\"");
      }
    } catch (const json::type_error& e) {
      malformed(where, e.what());
    }
    item.vectors = parse_vectors(require(j, "vectors", where), where + ".vectors");
    if (item.kind == CacheKind::Tokens && item.tokens.size() != item.vectors.size()) {
      malformed(where, std::to_string(item.tokens.size()) + " tokens but " +
                           std::to_string(item.vectors.size()) + " vectors");
    }
    for (std::size_t r = 0; r < item.vectors.size(); ++r) {
      if (item.vectors[r].size() != info.dim) {
        throw Error(ErrorCode::DimensionMismatch, where + ".vectors[" + std::to_string(r) +
                                                      "] has dim " +
                                                      std::to_string(item.vectors[r].size()) +
                                                      ", cache declares " + std::to_string(info.dim));
      }
    }
    items.push_back(std::move(item));
  }
  return CacheBackend(std::move(info), std::move(items));
}

CacheBackend load_embedding_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedCache, "cannot open embedding cache " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_embedding_cache(ss.str());
}

std::string serialize_embedding_cache(const ProviderInfo& info,
                                      const std::vector<CacheItem>& items) {
  json doc;
  doc["model"] = info.model_name;
  doc["dim"] = info.dim;
  doc["normalized"] = info.normalized;
  json arr = json::array();
  for (const auto& item : items) {
    json j;
    j["key"] = item.key;
    j["kind"] = item.kind == CacheKind::Sentence ? "sentence" : "tokens";
    j["text"] = item.text;
    if (item.kind == CacheKind::Tokens) j["tokens"] = item.tokens;
    j["vectors"] = item.vectors;
    arr.push_back(std::move(j));
  }
  doc["items"] = std::move(arr);
  return doc.dump();
}

void write_embedding_cache(const ProviderInfo& info, const std::vector<CacheItem>& items,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write embedding cache " + path.string());
  out << serialize_embedding_cache(info, items) << '\n';
  if (!out) throw Error(ErrorCode::InvalidArgument, "failed writing embedding cache " + path.string());
}

std::vector<CacheItem> collect_cache_items(const Backend& backend,
                                           const std::vector<std::string>& sentence_texts,
                                           const std::vector<std::string>& token_texts) {
  std::vector<CacheItem> items;
  if (!sentence_texts.empty()) {
    const auto vectors = backend.sentence_vectors(sentence_texts);
    for (std::size_t i = 0; i < sentence_texts.size(); ++i) {
      auto row = vectors.row(i);
      items.push_back({sha256_hex(sentence_texts[i]), CacheKind::Sentence, sentence_texts[i], {},
                       {std::vector<double>(row.begin(), row.end())}});
    }
  }
  if (!token_texts.empty()) {
    const auto per_sentence = backend.token_vectors(token_texts);
    for (std::size_t i = 0; i < token_texts.size(); ++i) {
      items.push_back({sha256_hex(token_texts[i]), CacheKind::Tokens, token_texts[i],
                       per_sentence[i].tokens, per_sentence[i].vectors.to_rows()});
    }
  }
  return items;
}

}  // namespace misem::embed
