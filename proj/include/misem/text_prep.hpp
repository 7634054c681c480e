#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace misem::text {

struct Document {
  std::string doc_id;
  std::string raw_text;  // UTF-8
};

/// Half-open byte range into Document::raw_text.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Sentence {
  std::size_t index = 0;
  std::string text;
  CharSpan span;
  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct SentenceSplit {
  std::vector<Sentence> sentences;
  friend bool operator==(const SentenceSplit&, const SentenceSplit&) = default;
};

enum class SplitMode {
  RuleBased,  // terminal punctuation heuristics with an abbreviation stop-list
  Lines,      // input is already split, one sentence per line
};

struct SplitterChoice {
  SplitMode mode = SplitMode::RuleBased;
  /// Lower-case abbreviations without the trailing period ("dr", "e.g").
  std::vector<std::string> abbreviations = default_abbreviations();

  static std::vector<std::string> default_abbreviations();
};

SentenceSplit split_sentences(const Document& doc, const SplitterChoice& splitter = {});

struct DocumentSentences {
  std::string doc_id;
  SentenceSplit split;  // Sentence::index is the global index across all documents
};

std::vector<DocumentSentences> merge_reference_documents(const std::vector<Document>& docs,
                                                         const SplitterChoice& splitter = {});

std::vector<std::string> sentence_texts(const std::vector<DocumentSentences>& merged);
std::vector<std::string> sentence_texts(const SentenceSplit& split);

/// Parses the pre-split format: one sentence per line, blank line between documents.
/// Document ids are "<id_prefix><n>".
std::vector<Document> parse_pre_split(const std::string& contents,
                                      const std::string& id_prefix = "doc");

std::string trim(const std::string& s);
bool is_blank(const std::string& s);

}  // namespace misem::text
