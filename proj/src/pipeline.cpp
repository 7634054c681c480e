#include "misem/pipeline.hpp"

#include "misem/error.hpp"

namespace misem {

embed::EmbedOptions PipelineConfig::embed_options() const {
  embed::EmbedOptions options;
  options.normalize_sentences = normalize_sentences;
  options.normalize_tokens = normalize_tokens;
  options.drop_punctuation_tokens = drop_punctuation_tokens;
  return options;
}

void PipelineConfig::validate() const { scoring.cluster.validate(); }

ScoredSummary score_sentences(const std::vector<std::string>& reference_sentences,
                              const std::vector<std::string>& summary_sentences,
                              const PipelineConfig& config, const embed::Backend& backend) {
  config.validate();
  if (reference_sentences.empty()) throw Error(ErrorCode::EmptyReference, "reference text is empty");
  if (summary_sentences.empty()) throw Error(ErrorCode::EmptySummary, "summary text is empty");
  ScoredSummary out;
  const auto options = config.embed_options();
  out.reference = embed::embed_sentences(reference_sentences, backend, options);
  out.summary = embed::embed_summary_tokens(summary_sentences, backend, options);
  out.report = scoring::evaluate(out.reference, out.summary, config.scoring);
  return out;
}

ScoredSummary score_texts(const std::vector<text::Document>& reference_docs,
                          const std::string& summary_text, const PipelineConfig& config,
                          const embed::Backend& backend) {
  if (reference_docs.empty()) throw Error(ErrorCode::EmptyReference, "no reference documents");
  if (text::is_blank(summary_text)) throw Error(ErrorCode::EmptySummary, "summary text is empty");
  for (const auto& doc : reference_docs) {
    if (text::is_blank(doc.raw_text)) {
      throw Error(ErrorCode::EmptyReference, "reference document '" + doc.doc_id + "' is empty");
    }
  }
  const auto merged = text::merge_reference_documents(reference_docs, config.splitter);
  const auto summary = text::split_sentences({"summary", summary_text}, config.splitter);
  return score_sentences(text::sentence_texts(merged), text::sentence_texts(summary), config,
                         backend);
}

}  // namespace misem
