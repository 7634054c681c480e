#include "misem/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "misem/error.hpp"

namespace misem::scoring {

std::string to_string(SoftmaxAxis axis) {
  return axis == SoftmaxAxis::PerToken ? "per_token" : "per_topic";
}

SoftmaxAxis parse_softmax_axis(const std::string& name) {
  if (name == "per_token") return SoftmaxAxis::PerToken;
  if (name == "per_topic") return SoftmaxAxis::PerTopic;
  throw Error(ErrorCode::InvalidArgument, "unknown softmax axis '" + name + "'");
}

SankeyMode parse_sankey_mode(const std::string& name) {
  if (name == "soft") return SankeyMode::Soft;
  if (name == "argmax") return SankeyMode::Argmax;
  throw Error(ErrorCode::InvalidArgument, "unknown sankey mode '" + name + "'");
}

std::vector<double> softmax(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  for (double v : out) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "softmax of non-finite input");
  }
  const double max = *std::max_element(out.begin(), out.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - max);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

SimilarityMatrix cosine_similarity_matrix(const Matrix& centroids, const Matrix& tokens) {
  if (centroids.cols() != tokens.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "centroid dim " + std::to_string(centroids.cols()) + " differs from token dim " +
                    std::to_string(tokens.cols()));
  }
  std::vector<double> centroid_norms(centroids.rows());
  for (std::size_t t = 0; t < centroids.rows(); ++t) {
    centroid_norms[t] = l2_norm(centroids.row(t));
    if (centroid_norms[t] == 0.0) throw Error(ErrorCode::ZeroVector, "topic centroid is a zero vector");
  }
  std::vector<double> token_norms(tokens.rows());
  for (std::size_t i = 0; i < tokens.rows(); ++i) {
    token_norms[i] = l2_norm(tokens.row(i));
    if (token_norms[i] == 0.0) throw Error(ErrorCode::ZeroVector, "token embedding is a zero vector");
  }
  SimilarityMatrix out{Matrix(centroids.rows(), tokens.rows()), Stage::RawCosine};
  for (std::size_t t = 0; t < centroids.rows(); ++t) {
    for (std::size_t i = 0; i < tokens.rows(); ++i) {
      const double c = dot(centroids.row(t), tokens.row(i)) / (centroid_norms[t] * token_norms[i]);
      out.values(t, i) = std::clamp(c, -1.0, 1.0);
    }
  }
  return out;
}

SimilarityMatrix softmax_columns(const SimilarityMatrix& raw) {
  SimilarityMatrix out{raw.values, Stage::Softmaxed};
  const std::size_t topics = raw.values.rows();
  std::vector<double> column(topics);
  for (std::size_t i = 0; i < raw.values.cols(); ++i) {
    for (std::size_t t = 0; t < topics; ++t) column[t] = raw.values(t, i);
    const auto normalized = softmax(column);
    for (std::size_t t = 0; t < topics; ++t) out.values(t, i) = normalized[t];
  }
  return out;
}

SimilarityMatrix softmax_rows(const SimilarityMatrix& raw) {
  SimilarityMatrix out{raw.values, Stage::Softmaxed};
  for (std::size_t t = 0; t < raw.values.rows(); ++t) {
    const auto normalized = softmax(raw.values.row(t));
    std::copy(normalized.begin(), normalized.end(), out.values.row(t).begin());
  }
  return out;
}

std::vector<double> topic_scores(const SimilarityMatrix& softmaxed) {
  if (softmaxed.stage != Stage::Softmaxed) {
    throw Error(ErrorCode::InvalidArgument, "topic scores need a softmax-normalized matrix");
  }
  if (softmaxed.values.cols() == 0) throw Error(ErrorCode::EmptySummary, "summary has no tokens");
  std::vector<double> sums(softmaxed.values.rows(), 0.0);
  for (std::size_t t = 0; t < sums.size(); ++t) {
    for (double v : softmaxed.values.row(t)) sums[t] += v;
  }
  return sums;
}

std::vector<double> normalize_topic_scores(std::span<const double> raw_topic_sums) {
  if (raw_topic_sums.empty()) throw Error(ErrorCode::EmptyReference, "no topics to normalize");
  return softmax(raw_topic_sums);
}

double final_score(std::span<const double> weights, std::span<const double> scores) {
  if (weights.size() != scores.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(weights.size()) + " weights but " +
                                               std::to_string(scores.size()) + " topic scores");
  }
  double m = 0.0;
  for (std::size_t t = 0; t < weights.size(); ++t) m += weights[t] * scores[t];
  return m;
}

ScoreReport evaluate(const cluster::TopicModel& topics, const embed::EmbeddedSummary& summary,
                     SoftmaxAxis axis) {
  if (summary.embeddings.rows() == 0) throw Error(ErrorCode::EmptySummary, "summary has no tokens");
  if (topics.topics.empty()) throw Error(ErrorCode::EmptyReference, "topic model has no topics");

  ScoreReport report;
  report.topic_model = topics;
  report.tokens = summary.tokens;
  report.params.cluster = topics.params;
  report.params.softmax_axis = axis;

  Matrix centroids;
  for (const auto& topic : topics.topics) {
    centroids.append_row(topic.centroid);
    report.weights.push_back(topic.weight);
  }
  report.raw = cosine_similarity_matrix(centroids, summary.embeddings);
  report.softmaxed = axis == SoftmaxAxis::PerToken ? softmax_columns(report.raw)
                                                   : softmax_rows(report.raw);
  report.raw_topic_sums = topic_scores(report.softmaxed);
  report.topic_scores = normalize_topic_scores(report.raw_topic_sums);
  report.final_score = final_score(report.weights, report.topic_scores);

  const std::size_t n = report.softmaxed.values.cols();
  report.token_allocations.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TokenAllocation alloc{i, std::vector<double>(report.weights.size())};
    for (std::size_t t = 0; t < alloc.shares.size(); ++t) alloc.shares[t] = report.softmaxed.values(t, i);
    report.token_allocations.push_back(std::move(alloc));
  }
  return report;
}

ScoreReport evaluate(const embed::EmbeddedReference& reference,
                     const embed::EmbeddedSummary& summary, const ScoringParams& params) {
  if (reference.embeddings.rows() == 0) throw Error(ErrorCode::EmptyReference, "reference has no sentences");
  if (summary.embeddings.rows() == 0) throw Error(ErrorCode::EmptySummary, "summary has no tokens");
  return evaluate(cluster::build_topic_model(reference, params.cluster), summary,
                  params.softmax_axis);
}

std::vector<TokenSimilarity> token_topic_allocation(const ScoreReport& report,
                                                    std::size_t topic_id, double threshold) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [-1, 1]");
  }
  if (topic_id >= report.topic_count()) {
    throw Error(ErrorCode::UnknownTopic, "unknown topic " + std::to_string(topic_id));
  }
  std::vector<TokenSimilarity> out;
  for (std::size_t i = 0; i < report.token_count(); ++i) {
    const double s = report.raw.values(topic_id, i);
    if (s >= threshold) out.push_back({i, s});
  }
  std::stable_sort(out.begin(), out.end(), [](const TokenSimilarity& a, const TokenSimilarity& b) {
    return a.similarity > b.similarity;
  });
  return out;
}

std::vector<SankeyEdge> sankey_edges(const ScoreReport& report, SankeyMode mode) {
  const auto& c = report.softmaxed.values;
  std::vector<SankeyEdge> edges;
  if (mode == SankeyMode::Soft) {
    edges.reserve(c.rows() * c.cols());
    for (std::size_t t = 0; t < c.rows(); ++t) {
      for (std::size_t i = 0; i < c.cols(); ++i) edges.push_back({t, i, c(t, i)});
    }
    return edges;
  }
  edges.reserve(c.cols());
  for (std::size_t i = 0; i < c.cols(); ++i) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < c.rows(); ++t) {
      if (c(t, i) > c(best, i)) best = t;
    }
    edges.push_back({best, i, 1.0});
  }
  std::stable_sort(edges.begin(), edges.end(),
                   [](const SankeyEdge& a, const SankeyEdge& b) { return a.topic_id < b.topic_id; });
  return edges;
}

}  // namespace misem::scoring
