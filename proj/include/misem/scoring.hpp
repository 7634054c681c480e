#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "misem/clustering.hpp"
#include "misem/embedding.hpp"
#include "misem/matrix.hpp"

namespace misem::scoring {

enum class Stage { RawCosine, Softmaxed };

/// Axis over which the topic x token similarity matrix is softmax-normalized.
/// PerToken normalizes each token column over topics.
enum class SoftmaxAxis { PerToken, PerTopic };

std::string to_string(SoftmaxAxis axis);
SoftmaxAxis parse_softmax_axis(const std::string& name);

/// Topics x summary tokens.
struct SimilarityMatrix {
  Matrix values;
  Stage stage = Stage::RawCosine;
};

struct ScoringParams {
  cluster::ClusterParams cluster;
  SoftmaxAxis softmax_axis = SoftmaxAxis::PerToken;
};

struct TokenAllocation {
  std::size_t token_index = 0;
  std::vector<double> shares;  // one per topic, the token's softmaxed column
};

struct ScoreReport {
  double final_score = 0.0;
  std::vector<double> topic_scores;    // S, softmax of raw_topic_sums
  std::vector<double> raw_topic_sums;  // s_t
  std::vector<double> weights;         // W
  SimilarityMatrix raw;
  SimilarityMatrix softmaxed;
  std::vector<TokenAllocation> token_allocations;
  cluster::TopicModel topic_model;
  std::vector<embed::SummaryToken> tokens;
  ScoringParams params;

  std::size_t topic_count() const { return weights.size(); }
  std::size_t token_count() const { return raw.values.cols(); }
  bool degenerate() const { return topic_count() == 1; }
};

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> values);

SimilarityMatrix cosine_similarity_matrix(const Matrix& centroids, const Matrix& tokens);
SimilarityMatrix softmax_columns(const SimilarityMatrix& raw);
SimilarityMatrix softmax_rows(const SimilarityMatrix& raw);
std::vector<double> topic_scores(const SimilarityMatrix& softmaxed);
std::vector<double> normalize_topic_scores(std::span<const double> raw_topic_sums);
double final_score(std::span<const double> weights, std::span<const double> scores);

ScoreReport evaluate(const embed::EmbeddedReference& reference,
                     const embed::EmbeddedSummary& summary, const ScoringParams& params = {});

/// Scores a summary against an already built topic model.
ScoreReport evaluate(const cluster::TopicModel& topics, const embed::EmbeddedSummary& summary,
                     SoftmaxAxis axis = SoftmaxAxis::PerToken);

struct TokenSimilarity {
  std::size_t token_index = 0;
  double similarity = 0.0;
};

/// Tokens whose raw cosine similarity to the topic centroid is >= threshold, most
/// similar first.
std::vector<TokenSimilarity> token_topic_allocation(const ScoreReport& report,
                                                    std::size_t topic_id, double threshold);

enum class SankeyMode { Soft, Argmax };
SankeyMode parse_sankey_mode(const std::string& name);

struct SankeyEdge {
  std::size_t topic_id = 0;
  std::size_t token_index = 0;
  double weight = 0.0;
};

std::vector<SankeyEdge> sankey_edges(const ScoreReport& report, SankeyMode mode);

}  // namespace misem::scoring
