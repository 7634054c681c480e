#include "misem/text_prep.hpp"

#include <algorithm>
#include <cctype>
#include <string_view>
#include <unordered_set>

#include "misem/error.hpp"

namespace misem::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Length of a closing quote/bracket at `pos`, 0 if none. Handles the UTF-8 right quotes.
std::size_t closer_length(std::string_view s, std::size_t pos) {
  const char c = s[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  if (s.substr(pos, 3) == "\xE2\x80\x9D" || s.substr(pos, 3) == "\xE2\x80\x99") return 3;
  return 0;
}

// Upper-case letters in the Latin-1, Latin Extended-A, Greek and Cyrillic blocks.
bool is_upper_code_point(char32_t cp) {
  if (cp >= 0xC0 && cp <= 0xDE) return cp != 0xD7;
  if (cp >= 0x100 && cp <= 0x17F) return cp % 2 == 0;
  if (cp >= 0x391 && cp <= 0x3A9) return true;
  return cp >= 0x400 && cp <= 0x42F;
}

char32_t two_byte_code_point(std::string_view s, std::size_t pos) {
  if (pos + 1 >= s.size()) return 0;
  const auto a = static_cast<unsigned char>(s[pos]);
  const auto b = static_cast<unsigned char>(s[pos + 1]);
  if ((a & 0xE0) != 0xC0 || (b & 0xC0) != 0x80) return 0;
  return static_cast<char32_t>(((a & 0x1F) << 6) | (b & 0x3F));
}

// Whether the character at `pos` may start a new sentence.
bool opens_sentence(std::string_view s, std::size_t pos) {
  const auto c = static_cast<unsigned char>(s[pos]);
  if (c < 0x80 && (std::isupper(c) || std::isdigit(c))) return true;
  if (is_upper_code_point(two_byte_code_point(s, pos))) return true;
  if (c == '"' || c == '\'' || c == '(' || c == '[') return true;
  return s.substr(pos, 3) == "\xE2\x80\x9C" || s.substr(pos, 3) == "\xE2\x80\x98";
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// The word ending just before the period at `period`, without leading quotes/brackets.
std::string word_before(std::string_view s, std::size_t period) {
  std::size_t b = period;
  while (b > 0 && !is_space(s[b - 1])) --b;
  while (b < period && (s[b] == '"' || s[b] == '\'' || s[b] == '(' || s[b] == '[')) ++b;
  return lower_ascii(s.substr(b, period - b));
}

class SentenceCollector {
 public:
  explicit SentenceCollector(std::string_view text) : text_(text) {}

  void add(std::size_t start, std::size_t end) {
    while (start < end && is_space(text_[start])) ++start;
    while (end > start && is_space(text_[end - 1])) --end;
    if (start == end) return;
    Sentence s;
    s.index = split_.sentences.size();
    s.text = std::string(text_.substr(start, end - start));
    s.span = {start, end};
    split_.sentences.push_back(std::move(s));
  }

  SentenceSplit take() { return std::move(split_); }

 private:
  std::string_view text_;
  SentenceSplit split_;
};

SentenceSplit split_rule_based(std::string_view text,
                               const std::unordered_set<std::string>& abbreviations) {
  SentenceCollector out(text);
  const std::size_t n = text.size();
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < n) {
    const char c = text[i];
    if (is_space(c)) {
      // A blank line always ends the current sentence.
      std::size_t j = i;
      int newlines = 0;
      while (j < n && is_space(text[j])) newlines += text[j++] == '\n';
      if (newlines >= 2) {
        out.add(start, i);
        start = j;
      }
      i = j;
      continue;
    }
    if (!is_terminal(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && is_terminal(text[j])) ++j;
    const bool single_period = c == '.' && j == i + 1;
    for (std::size_t len; j < n && (len = closer_length(text, j)) > 0;) j += len;
    const std::size_t end = j;
    if (j == n) {
      i = j;
      break;
    }
    if (!is_space(text[j])) {
      i = j;
      continue;
    }
    std::size_t k = j;
    int newlines = 0;
    while (k < n && is_space(text[k])) newlines += text[k++] == '\n';
    const bool paragraph_break = newlines >= 2;
    if (!paragraph_break && k < n && !opens_sentence(text, k)) {
      i = k;
      continue;
    }
    if (!paragraph_break && single_period && abbreviations.contains(word_before(text, i))) {
      i = k;
      continue;
    }
    out.add(start, end);
    start = k;
    i = k;
  }
  out.add(start, n);
  return out.take();
}

SentenceSplit split_lines(std::string_view text) {
  SentenceCollector out(text);
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    out.add(line_start, line_end);
    line_start = line_end + 1;
  }
  return out.take();
}

}  // namespace

std::vector<std::string> SplitterChoice::default_abbreviations() {
  return {"dr",   "mr",   "mrs",  "ms",   "prof", "st",   "jr",   "sr",   "sen",  "rep",
          "gov",  "gen",  "col",  "lt",   "sgt",  "capt", "rev",  "inc",  "ltd",  "co",
          "corp", "vs",   "etc",  "e.g",  "i.e",  "u.s",  "u.k",  "u.n",  "no",   "jan",
          "feb",  "mar",  "apr",  "jun",  "jul",  "aug",  "sep",  "sept", "oct",  "nov",
          "dec",  "mt",   "ft",   "approx"};
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_space(c); });
}

SentenceSplit split_sentences(const Document& doc, const SplitterChoice& splitter) {
  if (is_blank(doc.raw_text)) {
    throw Error(ErrorCode::EmptyDocument, "document '" + doc.doc_id + "' has no text");
  }
  if (splitter.mode == SplitMode::Lines) return split_lines(doc.raw_text);
  std::unordered_set<std::string> abbreviations;
  for (const auto& a : splitter.abbreviations) abbreviations.insert(lower_ascii(a));
  return split_rule_based(doc.raw_text, abbreviations);
}

std::vector<DocumentSentences> merge_reference_documents(const std::vector<Document>& docs,
                                                         const SplitterChoice& splitter) {
  if (docs.empty()) throw Error(ErrorCode::EmptyReference, "no reference documents");
  std::vector<DocumentSentences> merged;
  merged.reserve(docs.size());
  std::size_t next_index = 0;
  for (const auto& doc : docs) {
    DocumentSentences ds{doc.doc_id, split_sentences(doc, splitter)};
    for (auto& s : ds.split.sentences) s.index = next_index++;
    merged.push_back(std::move(ds));
  }
  return merged;
}

std::vector<std::string> sentence_texts(const SentenceSplit& split) {
  std::vector<std::string> out;
  out.reserve(split.sentences.size());
  for (const auto& s : split.sentences) out.push_back(s.text);
  return out;
}

std::vector<std::string> sentence_texts(const std::vector<DocumentSentences>& merged) {
  std::vector<std::string> out;
  for (const auto& d : merged) {
    for (const auto& s : d.split.sentences) out.push_back(s.text);
  }
  return out;
}

std::vector<Document> parse_pre_split(const std::string& contents, const std::string& id_prefix) {
  std::vector<Document> docs;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    docs.push_back({id_prefix + std::to_string(docs.size()), std::move(current)});
    current.clear();
  };
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t end = contents.find('\n', pos);
    if (end == std::string::npos) end = contents.size();
    std::string line = contents.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) {
      flush();
    } else {
      if (!current.empty()) current += '\n';
      current += line;
    }
    pos = end + 1;
  }
  flush();
  return docs;
}

}  // namespace misem::text
