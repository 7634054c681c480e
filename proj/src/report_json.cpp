#include "misem/report_json.hpp"

#include <cmath>
#include <set>

#include "misem/error.hpp"

namespace misem::io {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

template <typename T, typename Parse>
T read(const json& j, const char* key, T fallback, Parse parse) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return parse(*it);
  } catch (const json::type_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("field '") + key + "' has the wrong type");
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

json cluster_params_to_json(const cluster::ClusterParams& params) {
  return {{"affinity", "cosine"},
          {"linkage", cluster::to_string(params.linkage)},
          {"distance_threshold", params.distance_threshold}};
}

cluster::ClusterParams cluster_params_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "cluster params must be an object");
  cluster::ClusterParams p;
  const auto affinity = read<std::string>(j, "affinity", "cosine",
                                          [](const json& v) { return v.get<std::string>(); });
  if (affinity != "cosine") throw Error(ErrorCode::SchemaError, "only cosine affinity is supported");
  p.linkage = read(j, "linkage", p.linkage,
                   [](const json& v) { return cluster::parse_linkage(v.get<std::string>()); });
  p.distance_threshold = read(j, "distance_threshold", p.distance_threshold,
                              [](const json& v) { return v.get<double>(); });
  return p;
}

json pipeline_config_to_json(const PipelineConfig& config) {
  json j = cluster_params_to_json(config.scoring.cluster);
  j["softmax_axis"] = scoring::to_string(config.scoring.softmax_axis);
  j["normalize_sentences"] = config.normalize_sentences;
  j["normalize_tokens"] = config.normalize_tokens;
  j["drop_punctuation_tokens"] = config.drop_punctuation_tokens;
  return j;
}

PipelineConfig pipeline_config_from_json(const json& j, const PipelineConfig& base) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "params must be a JSON object");
  static const std::set<std::string> kKnown{"affinity",          "linkage",
                                            "distance_threshold", "softmax_axis",
                                            "normalize_sentences", "normalize_tokens",
                                            "drop_punctuation_tokens"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw Error(ErrorCode::SchemaError, "unknown params field '" + key + "'");
  }
  PipelineConfig c = base;
  json cluster_part = cluster_params_to_json(base.scoring.cluster);
  for (const char* key : {"affinity", "linkage", "distance_threshold"}) {
    if (j.contains(key)) cluster_part[key] = j[key];
  }
  c.scoring.cluster = cluster_params_from_json(cluster_part);
  c.scoring.softmax_axis = read(j, "softmax_axis", c.scoring.softmax_axis, [](const json& v) {
    return scoring::parse_softmax_axis(v.get<std::string>());
  });
  auto as_bool = [](const json& v) { return v.get<bool>(); };
  c.normalize_sentences = read(j, "normalize_sentences", c.normalize_sentences, as_bool);
  c.normalize_tokens = read(j, "normalize_tokens", c.normalize_tokens, as_bool);
  c.drop_punctuation_tokens = read(j, "drop_punctuation_tokens", c.drop_punctuation_tokens, as_bool);
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
  return c;
}

json score_report_to_json(const ScoredSummary& scored) {
  const auto& report = scored.report;
  json topics = json::array();
  for (std::size_t t = 0; t < report.topic_count(); ++t) {
    topics.push_back({{"id", t},
                      {"weight", report.weights[t]},
                      {"score", report.topic_scores[t]},
                      {"raw_score", report.raw_topic_sums[t]},
                      {"sentence_indices", report.topic_model.topics[t].member_indices}});
  }
  json tokens = json::array();
  for (const auto& tok : report.tokens) {
    json jt{{"index", tok.token_index}, {"text", tok.surface}, {"sentence", tok.sentence_index}};
    if (tok.span) jt["span"] = {tok.span->start, tok.span->end};
    tokens.push_back(std::move(jt));
  }
  json sentences = json::array();
  for (std::size_t i = 0; i < scored.reference.sentences.size(); ++i) {
    sentences.push_back({{"index", scored.reference.sentences[i].index},
                         {"text", scored.reference.sentences[i].text},
                         {"topic", report.topic_model.assignments[i]}});
  }
  return {{"score", report.final_score},
          {"degenerate", report.degenerate()},
          {"topics", std::move(topics)},
          {"matrix_raw", matrix_to_json(report.raw.values)},
          {"matrix_softmax", matrix_to_json(report.softmaxed.values)},
          {"tokens", std::move(tokens)},
          {"reference_sentences", std::move(sentences)},
          {"params", json{{"affinity", "cosine"},
                          {"linkage", cluster::to_string(report.params.cluster.linkage)},
                          {"distance_threshold", report.params.cluster.distance_threshold},
                          {"softmax_axis", scoring::to_string(report.params.softmax_axis)}}}};
}

json projection_to_json(const std::vector<projection::Point3>& points,
                        const std::vector<std::size_t>& topic_of_sentence,
                        const std::vector<embed::IndexedText>& sentences) {
  json out = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.push_back({{"i", sentences[i].index},
                   {"topic", topic_of_sentence[i]},
                   {"xyz", {points[i][0], points[i][1], points[i][2]}},
                   {"text", sentences[i].text}});
  }
  return out;
}

json correlation_to_json(const bench::CorrelationResult& result) {
  return {{"pearson_r", number_or_null(result.pearson_r)},
          {"spearman_rho", number_or_null(result.spearman_rho)},
          {"kendall_tau", number_or_null(result.kendall_tau)},
          {"n_pairs", result.n_pairs},
          {"n_groups", result.n_groups},
          {"aggregation", bench::to_string(result.aggregation)}};
}

json scored_rows_to_json(const std::vector<bench::ScoredRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    out.push_back({{"topic_id", row.topic_id},
                   {"system_id", row.system_id},
                   {"misem_score", row.misem_score ? json(*row.misem_score) : json(nullptr)},
                   {"human_score", row.human_score}});
  }
  return out;
}

json benchmark_output_to_json(const std::vector<bench::ScoredRow>& rows,
                              const PipelineConfig& config) {
  json correlations = json::object();
  for (auto aggregation : {bench::Aggregation::Pooled, bench::Aggregation::PerTopicMean}) {
    try {
      correlations[bench::to_string(aggregation)] =
          correlation_to_json(bench::correlate(rows, aggregation));
    } catch (const Error& e) {
      correlations[bench::to_string(aggregation)] = {{"error", e.what()}};
    }
  }
  json errors = json::array();
  for (const auto& row : rows) {
    if (!row.misem_score) {
      errors.push_back({{"topic_id", row.topic_id}, {"system_id", row.system_id}, {"error", row.error}});
    }
  }
  return {{"rows", scored_rows_to_json(rows)},
          {"correlations", std::move(correlations)},
          {"params", pipeline_config_to_json(config)},
          {"errors", std::move(errors)}};
}

json grid_rows_to_json(const std::vector<bench::GridRow>& rows) {
  json out = json::array();
  for (std::size_t rank = 0; rank < rows.size(); ++rank) {
    const auto& row = rows[rank];
    out.push_back({{"rank", rank + 1},
                   {"grid_index", row.grid_index},
                   {"params", pipeline_config_to_json(row.config)},
                   {"pooled", correlation_to_json(row.pooled)},
                   {"per_topic_mean", correlation_to_json(row.per_topic_mean)},
                   {"errors", row.errors}});
  }
  return out;
}

}  // namespace misem::io
