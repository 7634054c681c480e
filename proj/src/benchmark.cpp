#include "misem/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "misem/correlation.hpp"
#include "misem/error.hpp"

namespace misem::bench {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::SchemaError, "dataset line " + std::to_string(line) + ": " + what);
}

const json& field(const json& obj, const char* name, std::size_t line, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end()) schema_error(line, "missing field '" + std::string(name) + "'" + where);
  return *it;
}

BenchmarkRecord parse_record(const json& j, std::size_t line) {
  if (!j.is_object()) schema_error(line, "record is not a JSON object");
  BenchmarkRecord record;
  const auto& topic = field(j, "topic_id", line, "");
  if (!topic.is_string()) schema_error(line, "'topic_id' must be a string");
  record.topic_id = topic.get<std::string>();

  const auto& refs = field(j, "references", line, "");
  if (!refs.is_array() || refs.empty()) schema_error(line, "'references' must be a non-empty array");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!refs[i].is_string()) schema_error(line, "references[" + std::to_string(i) + "] must be a string");
    auto text = refs[i].get<std::string>();
    if (text::is_blank(text)) schema_error(line, "references[" + std::to_string(i) + "] is empty");
    record.reference_docs.push_back({record.topic_id + "/" + std::to_string(i), std::move(text)});
  }

  const auto& sums = field(j, "summaries", line, "");
  if (!sums.is_array() || sums.empty()) schema_error(line, "'summaries' must be a non-empty array");
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const std::string where = " in summaries[" + std::to_string(i) + "]";
    const auto& s = sums[i];
    if (!s.is_object()) schema_error(line, "summaries[" + std::to_string(i) + "] is not an object");
    const auto& id = field(s, "id", line, where);
    const auto& text = field(s, "text", line, where);
    const auto& score = field(s, "human_score", line, where);
    if (!id.is_string()) schema_error(line, "'id' must be a string" + where);
    if (!text.is_string()) schema_error(line, "'text' must be a string" + where);
    if (!score.is_number() || !std::isfinite(score.get<double>())) {
      schema_error(line, "'human_score' must be a finite number" + where);
    }
    record.summaries.push_back({id.get<std::string>(), text.get<std::string>(), score.get<double>()});
  }
  return record;
}

struct PreparedSummary {
  std::optional<embed::EmbeddedSummary> tokens;  // un-normalized
  std::string error;
};

struct PreparedTopic {
  std::optional<embed::EmbeddedReference> reference;  // un-normalized
  std::string error;
  std::vector<PreparedSummary> summaries;
};

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(error_code_name(err->code())) + ": " + err->what();
  }
  return e.what();
}

template <typename Job>
void parallel_for(std::size_t count, std::size_t workers, Job job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) job(i);
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
}

std::vector<PreparedTopic> prepare(const std::vector<BenchmarkRecord>& records,
                                   const PipelineConfig& config, const embed::Backend& backend,
                                   const RunOptions& options) {
  embed::EmbedOptions raw = config.embed_options();
  raw.normalize_sentences = false;
  raw.normalize_tokens = false;
  std::vector<PreparedTopic> prepared(records.size());
  parallel_for(records.size(), options.workers, [&](std::size_t r) {
    const auto& record = records[r];
    auto& out = prepared[r];
    out.summaries.resize(record.summaries.size());
    try {
      const auto merged = text::merge_reference_documents(record.reference_docs, config.splitter);
      out.reference = embed::embed_sentences(text::sentence_texts(merged), backend, raw);
    } catch (const std::exception& e) {
      out.error = describe(e);
    }
    for (std::size_t s = 0; s < record.summaries.size(); ++s) {
      try {
        const auto& text = record.summaries[s].text;
        if (text::is_blank(text)) throw Error(ErrorCode::EmptySummary, "summary text is empty");
        const auto split = text::split_sentences({record.summaries[s].system_id, text}, config.splitter);
        out.summaries[s].tokens = embed::embed_summary_tokens(text::sentence_texts(split), backend, raw);
      } catch (const std::exception& e) {
        out.summaries[s].error = describe(e);
      }
    }
  });
  return prepared;
}

std::vector<ScoredRow> score_prepared(const std::vector<BenchmarkRecord>& records,
                                      const std::vector<PreparedTopic>& prepared,
                                      const PipelineConfig& config, const RunOptions& options) {
  std::vector<std::vector<ScoredRow>> per_topic(records.size());
  parallel_for(records.size(), options.workers, [&](std::size_t r) {
    const auto& record = records[r];
    const auto& prep = prepared[r];
    auto& rows = per_topic[r];
    std::optional<cluster::TopicModel> model;
    std::string topic_error = prep.error;
    if (topic_error.empty()) {
      try {
        auto reference = *prep.reference;
        if (config.normalize_sentences) embed::normalize_rows(reference.embeddings);
        model = cluster::build_topic_model(reference, config.scoring.cluster);
      } catch (const std::exception& e) {
        topic_error = describe(e);
      }
    }
    for (std::size_t s = 0; s < record.summaries.size(); ++s) {
      ScoredRow row{record.topic_id, record.summaries[s].system_id, std::nullopt,
                    record.summaries[s].human_score, {}};
      if (!topic_error.empty()) {
        row.error = "reference: " + topic_error;
      } else if (!prep.summaries[s].error.empty()) {
        row.error = prep.summaries[s].error;
      } else {
        try {
          auto summary = *prep.summaries[s].tokens;
          if (config.normalize_tokens) embed::normalize_rows(summary.embeddings);
          row.misem_score =
              scoring::evaluate(*model, summary, config.scoring.softmax_axis).final_score;
        } catch (const std::exception& e) {
          row.error = describe(e);
        }
      }
      rows.push_back(std::move(row));
    }
  });
  std::vector<ScoredRow> out;
  for (auto& rows : per_topic) {
    for (auto& row : rows) out.push_back(std::move(row));
  }
  return out;
}

struct Coefficients {
  double r;
  double rho;
  double tau;
};

Coefficients coefficients(const std::vector<double>& x, const std::vector<double>& y) {
  return {stats::pearson(x, y), stats::spearman(x, y), stats::kendall_tau_b(x, y)};
}

template <typename T>
std::vector<T> as_list(const json& j, const char* key, T (*convert)(const json&)) {
  std::vector<T> out;
  if (j.is_array()) {
    if (j.empty()) throw Error(ErrorCode::SchemaError, std::string("grid field '") + key + "' is empty");
    for (const auto& v : j) out.push_back(convert(v));
  } else {
    out.push_back(convert(j));
  }
  return out;
}

}  // namespace

std::vector<BenchmarkRecord> parse_dataset(const std::string& jsonl) {
  std::vector<BenchmarkRecord> records;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_blank(line)) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      schema_error(line_no, std::string("invalid JSON: ") + e.what());
    }
    auto record = parse_record(j, line_no);
    for (const auto& s : record.summaries) {
      if (!seen.emplace(record.topic_id, s.system_id).second) {
        throw Error(ErrorCode::DuplicateSummary, "dataset line " + std::to_string(line_no) +
                                                     ": duplicate summary '" + s.system_id +
                                                     "' for topic '" + record.topic_id + "'");
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<BenchmarkRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::SchemaError, "cannot open dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

std::vector<std::string> check_dataset_shape(const std::vector<BenchmarkRecord>& records,
                                             const DatasetShape& expected) {
  std::vector<std::string> warnings;
  if (records.size() != expected.topics) {
    warnings.push_back("expected " + std::to_string(expected.topics) + " topics, found " +
                       std::to_string(records.size()));
  }
  std::map<std::size_t, std::size_t> off_counts;  // summary count -> number of topics
  for (const auto& r : records) {
    if (r.summaries.size() != expected.summaries_per_topic) ++off_counts[r.summaries.size()];
  }
  for (const auto& [count, topics] : off_counts) {
    warnings.push_back(std::to_string(topics) + " topic(s) have " + std::to_string(count) +
                       " summaries, expected " + std::to_string(expected.summaries_per_topic));
  }
  return warnings;
}

std::vector<ScoredRow> run_benchmark(const std::vector<BenchmarkRecord>& records,
                                     const PipelineConfig& config, const embed::Backend& backend,
                                     const RunOptions& options) {
  config.validate();
  const auto prepared = prepare(records, config, backend, options);
  return score_prepared(records, prepared, config, options);
}

std::string to_string(Aggregation aggregation) {
  return aggregation == Aggregation::Pooled ? "pooled" : "per_topic_mean";
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "pooled") return Aggregation::Pooled;
  if (name == "per-topic" || name == "per_topic" || name == "per_topic_mean") {
    return Aggregation::PerTopicMean;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation '" + name + "'");
}

CorrelationResult correlate(const std::vector<ScoredRow>& rows, Aggregation aggregation) {
  CorrelationResult result;
  result.aggregation = aggregation;
  if (aggregation == Aggregation::Pooled) {
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& row : rows) {
      if (!row.misem_score) continue;
      x.push_back(*row.misem_score);
      y.push_back(row.human_score);
    }
    if (x.size() < 2) throw Error(ErrorCode::InsufficientData, "fewer than 2 scored rows");
    const auto c = coefficients(x, y);
    result.pearson_r = c.r;
    result.spearman_rho = c.rho;
    result.kendall_tau = c.tau;
    result.n_pairs = x.size();
    result.n_groups = 1;
    return result;
  }

  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& row : rows) {
    if (!row.misem_score) continue;
    auto [it, inserted] = groups.try_emplace(row.topic_id);
    if (inserted) order.push_back(row.topic_id);
    it->second.first.push_back(*row.misem_score);
    it->second.second.push_back(row.human_score);
  }
  double sum_r = 0.0;
  double sum_rho = 0.0;
  double sum_tau = 0.0;
  for (const auto& topic : order) {
    const auto& [x, y] = groups[topic];
    if (x.size() < 2) continue;
    Coefficients c{};
    try {
      c = coefficients(x, y);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConstantInput) continue;
      throw;
    }
    sum_r += c.r;
    sum_rho += c.rho;
    sum_tau += c.tau;
    result.n_pairs += x.size();
    ++result.n_groups;
  }
  if (result.n_groups == 0) {
    throw Error(ErrorCode::InsufficientData, "no topic has 2 or more non-constant scored rows");
  }
  const auto k = static_cast<double>(result.n_groups);
  result.pearson_r = sum_r / k;
  result.spearman_rho = sum_rho / k;
  result.kendall_tau = sum_tau / k;
  return result;
}

std::vector<PipelineConfig> ParamGrid::expand(const PipelineConfig& base) const {
  std::vector<PipelineConfig> out;
  for (auto linkage : linkages) {
    for (auto axis : softmax_axes) {
      for (bool ns : normalize_sentences) {
        for (bool nt : normalize_tokens) {
          for (double threshold : distance_thresholds) {
            PipelineConfig c = base;
            c.scoring.cluster.linkage = linkage;
            c.scoring.cluster.distance_threshold = threshold;
            c.scoring.softmax_axis = axis;
            c.normalize_sentences = ns;
            c.normalize_tokens = nt;
            out.push_back(std::move(c));
          }
        }
      }
    }
  }
  return out;
}

ParamGrid parse_param_grid(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("grid is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::SchemaError, "grid must be a JSON object");
  ParamGrid grid;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "linkage") {
        grid.linkages = as_list<cluster::Linkage>(value, "linkage", [](const json& v) {
          return cluster::parse_linkage(v.get<std::string>());
        });
      } else if (key == "distance_threshold") {
        grid.distance_thresholds = as_list<double>(value, "distance_threshold",
                                                   [](const json& v) { return v.get<double>(); });
      } else if (key == "softmax_axis") {
        grid.softmax_axes = as_list<scoring::SoftmaxAxis>(value, "softmax_axis", [](const json& v) {
          return scoring::parse_softmax_axis(v.get<std::string>());
        });
      } else if (key == "normalize_sentences") {
        grid.normalize_sentences = as_list<bool>(value, "normalize_sentences",
                                                 [](const json& v) { return v.get<bool>(); });
      } else if (key == "normalize_tokens") {
        grid.normalize_tokens = as_list<bool>(value, "normalize_tokens",
                                              [](const json& v) { return v.get<bool>(); });
      } else if (key != "affinity") {
        throw Error(ErrorCode::SchemaError, "unknown grid field '" + key + "'");
      }
    }
  } catch (const json::type_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("grid has a value of the wrong type: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw Error(ErrorCode::SchemaError, e.what());
    throw;
  }
  return grid;
}

std::vector<GridRow> grid_search(const std::vector<BenchmarkRecord>& records,
                                 const ParamGrid& grid, const embed::Backend& backend,
                                 Aggregation rank_by, const PipelineConfig& base,
                                 const RunOptions& options) {
  const auto configs = grid.expand(base);
  if (configs.empty()) throw Error(ErrorCode::InvalidArgument, "parameter grid is empty");
  for (const auto& c : configs) c.validate();
  const auto prepared = prepare(records, base, backend, options);

  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  auto safe_correlate = [&](const std::vector<ScoredRow>& rows, Aggregation a) {
    try {
      return correlate(rows, a);
    } catch (const Error&) {
      return CorrelationResult{kNaN, kNaN, kNaN, 0, 0, a};
    }
  };

  std::vector<GridRow> out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto rows = score_prepared(records, prepared, configs[i], options);
    GridRow row;
    row.grid_index = i;
    row.config = configs[i];
    row.pooled = safe_correlate(rows, Aggregation::Pooled);
    row.per_topic_mean = safe_correlate(rows, Aggregation::PerTopicMean);
    row.errors = static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const ScoredRow& r) { return !r.misem_score; }));
    out.push_back(std::move(row));
  }
  auto key = [&](const GridRow& r) {
    const double v = rank_by == Aggregation::Pooled ? r.pooled.pearson_r : r.per_topic_mean.pearson_r;
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  std::stable_sort(out.begin(), out.end(),
                   [&](const GridRow& a, const GridRow& b) { return key(a) > key(b); });
  return out;
}

}  // namespace misem::bench
