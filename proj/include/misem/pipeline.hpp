#pragma once

#include <string>
#include <vector>

#include "misem/embedding.hpp"
#include "misem/scoring.hpp"
#include "misem/text_prep.hpp"

namespace misem {

/// Everything that influences a score besides the texts and the embedding backend.
struct PipelineConfig {
  scoring::ScoringParams scoring;
  bool normalize_sentences = true;
  bool normalize_tokens = true;
  bool drop_punctuation_tokens = false;
  text::SplitterChoice splitter;

  embed::EmbedOptions embed_options() const;
  void validate() const;
};

struct ScoredSummary {
  embed::EmbeddedReference reference;
  embed::EmbeddedSummary summary;
  scoring::ScoreReport report;
};

/// Embeds already-split reference and summary sentences and runs the full score.
ScoredSummary score_sentences(const std::vector<std::string>& reference_sentences,
                              const std::vector<std::string>& summary_sentences,
                              const PipelineConfig& config, const embed::Backend& backend);

/// Splits raw texts with `config.splitter`, then scores.
ScoredSummary score_texts(const std::vector<text::Document>& reference_docs,
                          const std::string& summary_text, const PipelineConfig& config,
                          const embed::Backend& backend);

}  // namespace misem
