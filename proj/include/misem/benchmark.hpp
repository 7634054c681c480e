#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "misem/embedding.hpp"
#include "misem/pipeline.hpp"
#include "misem/scoring.hpp"
#include "misem/text_prep.hpp"

namespace misem::bench {

struct SystemSummary {
  std::string system_id;
  std::string text;
  double human_score = 0.0;
};

struct BenchmarkRecord {
  std::string topic_id;
  std::vector<text::Document> reference_docs;
  std::vector<SystemSummary> summaries;
};

std::vector<BenchmarkRecord> parse_dataset(const std::string& jsonl);
std::vector<BenchmarkRecord> load_dataset(const std::filesystem::path& path);

struct DatasetShape {
  std::size_t topics = 0;
  std::size_t summaries_per_topic = 0;
};

inline constexpr DatasetShape kTac08Shape{48, 57};
inline constexpr DatasetShape kTac09Shape{44, 55};

/// Human-readable warnings for every way `records` deviates from `expected`.
std::vector<std::string> check_dataset_shape(const std::vector<BenchmarkRecord>& records,
                                             const DatasetShape& expected);

struct ScoredRow {
  std::string topic_id;
  std::string system_id;
  std::optional<double> misem_score;  // empty when the row errored
  double human_score = 0.0;
  std::string error;
};

struct RunOptions {
  std::size_t workers = 0;  // 0 = hardware concurrency
};

std::vector<ScoredRow> run_benchmark(const std::vector<BenchmarkRecord>& records,
                                     const PipelineConfig& config, const embed::Backend& backend,
                                     const RunOptions& options = {});

enum class Aggregation { PerTopicMean, Pooled };
std::string to_string(Aggregation aggregation);
Aggregation parse_aggregation(const std::string& name);

struct CorrelationResult {
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  double kendall_tau = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_groups = 0;
  Aggregation aggregation = Aggregation::Pooled;
};

CorrelationResult correlate(const std::vector<ScoredRow>& rows, Aggregation aggregation);

struct ParamGrid {
  std::vector<cluster::Linkage> linkages{cluster::Linkage::Complete};
  std::vector<double> distance_thresholds{0.38};
  std::vector<scoring::SoftmaxAxis> softmax_axes{scoring::SoftmaxAxis::PerToken};
  std::vector<bool> normalize_sentences{true};
  std::vector<bool> normalize_tokens{true};

  /// Cartesian product; thresholds vary fastest, linkage slowest.
  std::vector<PipelineConfig> expand(const PipelineConfig& base = {}) const;
};

ParamGrid parse_param_grid(const std::string& json);

struct GridRow {
  std::size_t grid_index = 0;
  PipelineConfig config;
  CorrelationResult pooled;
  CorrelationResult per_topic_mean;
  std::size_t errors = 0;
};

/// Runs every grid configuration (texts are embedded once) and ranks by Pearson r on
/// `rank_by`, ties broken by grid order.
std::vector<GridRow> grid_search(const std::vector<BenchmarkRecord>& records,
                                 const ParamGrid& grid, const embed::Backend& backend,
                                 Aggregation rank_by = Aggregation::Pooled,
                                 const PipelineConfig& base = {}, const RunOptions& options = {});

}  // namespace misem::bench
