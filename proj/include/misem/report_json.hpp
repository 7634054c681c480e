#pragma once

#include <nlohmann/json.hpp>

#include "misem/benchmark.hpp"
#include "misem/clustering.hpp"
#include "misem/pipeline.hpp"
#include "misem/projection.hpp"
#include "misem/scoring.hpp"

namespace misem::io {

using nlohmann::json;

json cluster_params_to_json(const cluster::ClusterParams& params);
cluster::ClusterParams cluster_params_from_json(const json& j);

json pipeline_config_to_json(const PipelineConfig& config);
/// Missing fields keep the values of `base`. Throws SchemaError on bad types or values.
PipelineConfig pipeline_config_from_json(const json& j, const PipelineConfig& base = {});

/// {score, degenerate, topics, matrix_raw, matrix_softmax, tokens, reference_sentences, params}
json score_report_to_json(const ScoredSummary& scored);

json projection_to_json(const std::vector<projection::Point3>& points,
                        const std::vector<std::size_t>& topic_of_sentence,
                        const std::vector<embed::IndexedText>& sentences);

json correlation_to_json(const bench::CorrelationResult& result);
json scored_rows_to_json(const std::vector<bench::ScoredRow>& rows);

/// {"rows", "correlations": {"pooled", "per_topic_mean"}, "params", "errors"}
json benchmark_output_to_json(const std::vector<bench::ScoredRow>& rows,
                              const PipelineConfig& config);

json grid_rows_to_json(const std::vector<bench::GridRow>& rows);

}  // namespace misem::io
