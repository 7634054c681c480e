#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "misem/benchmark.hpp"
#include "misem/mock_backend.hpp"
#include "misem/report_json.hpp"
#include "support/error_check.hpp"

using namespace misem;
using namespace misem::bench;
using nlohmann::json;

namespace {

const std::string kSmoke = std::string(MISEM_DATA_DIR) + "/smoke.jsonl";

std::string record_line(const std::string& topic, const std::vector<std::pair<std::string, double>>& systems) {
  json sums = json::array();
  for (const auto& [id, score] : systems) {
    sums.push_back({{"id", id}, {"text", "Summary " + id + " mentions the budget vote."}, {"human_score", score}});
  }
  return json{{"topic_id", topic},
              {"references", {"The council approved the budget. Transit spending rises.", "Critics objected. Taxes may rise."}},
              {"summaries", sums}}
      .dump();
}

ScoredRow row(const std::string& topic, const std::string& system, double misem, double human) {
  return {topic, system, misem, human, {}};
}

}  // namespace

TEST_CASE("valid two line file") {
  const auto records = parse_dataset(record_line("T1", {{"a", 0.1}, {"b", 0.2}}) + "\n" +
                                     record_line("T2", {{"a", 0.3}}) + "\n");
  REQUIRE(records.size() == 2);
  CHECK(records[0].topic_id == "T1");
  CHECK(records[0].summaries.size() == 2);
  CHECK(records[0].reference_docs.size() == 2);
  CHECK(records[1].summaries[0].human_score == 0.3);
}

TEST_CASE("missing human score names the field and line") {
  auto bad = json::parse(record_line("T2", {{"a", 0.3}}));
  bad["summaries"][0].erase("human_score");
  std::string message;
  CAPTURE_ERROR(parse_dataset(record_line("T1", {{"a", 0.1}}) + "\n" + bad.dump() + "\n"), ErrorCode::SchemaError, message);
  CHECK(message.find("human_score") != std::string::npos);
  CHECK(message.find("line 2") != std::string::npos);
}

TEST_CASE("other schema violations") {
  CHECK_ERROR_CODE(parse_dataset("{not json}\n"), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(parse_dataset(R"({"topic_id": "T", "references": [], "summaries": []})"), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(parse_dataset(R"({"topic_id": "T", "references": ["x"], "summaries": [{"id": "a", "text": "t", "human_score": "high"}]})"),
                   ErrorCode::SchemaError);
  CHECK_ERROR_CODE(load_dataset("/nonexistent/data.jsonl"), ErrorCode::SchemaError);
}

TEST_CASE("duplicate summaries are rejected") {
  CHECK_ERROR_CODE(parse_dataset(record_line("T1", {{"a", 0.1}, {"a", 0.2}})), ErrorCode::DuplicateSummary);
  CHECK_ERROR_CODE(parse_dataset(record_line("T1", {{"a", 0.1}}) + "\n" + record_line("T1", {{"a", 0.2}})),
                   ErrorCode::DuplicateSummary);
}

TEST_CASE("shape check warns about unexpected counts") {
  const auto records = load_dataset(kSmoke);
  CHECK(check_dataset_shape(records, {5, 4}).empty());
  const auto warnings = check_dataset_shape(records, kTac08Shape);
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0] == "expected 48 topics, found 5");
  CHECK(warnings[1] == "5 topic(s) have 4 summaries, expected 57");
  CHECK(kTac08Shape.topics + kTac09Shape.topics == 92);
  CHECK(kTac09Shape.summaries_per_topic == 55);
}

TEST_CASE("one record with three summaries gives three rows") {
  const auto records = parse_dataset(record_line("T1", {{"a", 0.1}, {"b", 0.2}, {"c", 0.3}}));
  const embed::MockBackend mock;
  const auto rows = run_benchmark(records, {}, mock);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.misem_score.has_value());
    CHECK(r.error.empty());
  }
  CHECK(rows[2].system_id == "c");
}

TEST_CASE("benchmark rows agree with scoring the texts directly") {
  const auto records = load_dataset(kSmoke);
  const embed::MockBackend mock;
  const auto rows = run_benchmark(records, {}, mock);
  std::size_t k = 0;
  for (const auto& record : records) {
    for (const auto& s : record.summaries) {
      const auto& r = rows[k++];
      if (!r.misem_score) continue;
      CHECK(*r.misem_score == score_texts(record.reference_docs, s.text, {}, mock).report.final_score);
    }
  }
}

TEST_CASE("an empty summary errors its row and the run continues") {
  const auto records = load_dataset(kSmoke);
  const embed::MockBackend mock;
  const auto rows = run_benchmark(records, {}, mock);
  REQUIRE(rows.size() == 20);
  std::size_t errored = 0;
  for (const auto& r : rows) {
    if (!r.misem_score) {
      ++errored;
      CHECK(r.topic_id == "D0805");
      CHECK(r.system_id == "sys04");
      CHECK(r.error.rfind("EMPTY_SUMMARY", 0) == 0);
    }
  }
  CHECK(errored == 1);
}

TEST_CASE("smoke dataset runs quickly and deterministically across worker counts") {
  const auto records = load_dataset(kSmoke);
  const embed::MockBackend mock;
  const auto start = std::chrono::steady_clock::now();
  const auto one = run_benchmark(records, {}, mock, {1});
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed < std::chrono::seconds(10));
  const auto many = run_benchmark(records, {}, mock, {8});
  CHECK(io::scored_rows_to_json(one).dump() == io::scored_rows_to_json(many).dump());
}

TEST_CASE("a single topic correlates the same under both aggregations") {
  const std::vector<ScoredRow> rows = {row("T", "a", 0.1, 0.3), row("T", "b", 0.5, 0.2), row("T", "c", 0.4, 0.9),
                                       row("T", "d", 0.8, 0.7)};
  const auto pooled = correlate(rows, Aggregation::Pooled);
  const auto mean = correlate(rows, Aggregation::PerTopicMean);
  CHECK(pooled.pearson_r == mean.pearson_r);
  CHECK(pooled.spearman_rho == mean.spearman_rho);
  CHECK(pooled.kendall_tau == mean.kendall_tau);
  CHECK(pooled.n_pairs == 4);
}

TEST_CASE("per-topic mean averages within-topic coefficients") {
  const std::vector<ScoredRow> rows = {row("A", "a", 1, 1), row("A", "b", 2, 2), row("A", "c", 3, 3),
                                       row("B", "a", 1, 3), row("B", "b", 2, 2), row("B", "c", 3, 1)};
  const auto mean = correlate(rows, Aggregation::PerTopicMean);
  CHECK(mean.pearson_r == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(mean.n_groups == 2);
  CHECK(mean.n_pairs == 6);
}

TEST_CASE("pooled correlation ignores row order and skips errored rows") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ScoredRow> rows;
  for (int i = 0; i < 40; ++i) rows.push_back(row("T" + std::to_string(i % 4), "s" + std::to_string(i), u(rng), u(rng)));
  rows.push_back({"T0", "broken", std::nullopt, 0.5, "EMPTY_SUMMARY: x"});
  const auto base = correlate(rows, Aggregation::Pooled);
  CHECK(base.n_pairs == 40);
  std::shuffle(rows.begin(), rows.end(), rng);
  const auto shuffled = correlate(rows, Aggregation::Pooled);
  CHECK(std::abs(shuffled.pearson_r - base.pearson_r) < 1e-12);
  CHECK(shuffled.spearman_rho == doctest::Approx(base.spearman_rho).epsilon(1e-12));
  CHECK(shuffled.kendall_tau == doctest::Approx(base.kendall_tau).epsilon(1e-12));
}

TEST_CASE("too few rows") {
  CHECK_ERROR_CODE(correlate({row("T", "a", 0.1, 0.2)}, Aggregation::Pooled), ErrorCode::InsufficientData);
  CHECK_ERROR_CODE(correlate({row("T", "a", 0.1, 0.2), row("U", "a", 0.3, 0.4)}, Aggregation::PerTopicMean),
                   ErrorCode::InsufficientData);
  CHECK(parse_aggregation("per-topic") == Aggregation::PerTopicMean);
  CHECK_ERROR_CODE(parse_aggregation("median"), ErrorCode::InvalidArgument);
}

TEST_CASE("a one-point grid matches a plain run") {
  const auto records = load_dataset(kSmoke);
  const embed::MockBackend mock;
  const auto grid = grid_search(records, ParamGrid{}, mock);
  REQUIRE(grid.size() == 1);
  const auto rows = run_benchmark(records, {}, mock);
  const auto pooled = correlate(rows, Aggregation::Pooled);
  const auto mean = correlate(rows, Aggregation::PerTopicMean);
  CHECK(grid[0].pooled.pearson_r == pooled.pearson_r);
  CHECK(grid[0].pooled.kendall_tau == pooled.kendall_tau);
  CHECK(grid[0].per_topic_mean.spearman_rho == mean.spearman_rho);
  CHECK(grid[0].errors == 1);
}

TEST_CASE("threshold grid on the smoke dataset") {
  const auto records = load_dataset(kSmoke);
  const embed::MockBackend mock;
  std::ifstream in(std::string(MISEM_DATA_DIR) + "/grid_smoke.json");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto grid = parse_param_grid(text);
  CHECK(grid.distance_thresholds == std::vector<double>{0.2, 0.38, 0.6});
  const auto first = grid_search(records, grid, mock);
  const auto second = grid_search(records, grid, mock);
  REQUIRE(first.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(first[i].grid_index == second[i].grid_index);
    if (i > 0) {
      const double prev = first[i - 1].pooled.pearson_r, cur = first[i].pooled.pearson_r;
      CHECK((prev > cur || (prev == cur && first[i - 1].grid_index < first[i].grid_index)));
    }
  }
  // Each row agrees with a direct run of its configuration.
  for (const auto& g : first) {
    CHECK(correlate(run_benchmark(records, g.config, mock), Aggregation::Pooled).pearson_r == g.pooled.pearson_r);
  }
}

TEST_CASE("grid expansion order and parsing") {
  ParamGrid grid;
  grid.linkages = {cluster::Linkage::Complete, cluster::Linkage::Average};
  grid.distance_thresholds = {0.3, 0.5};
  const auto configs = grid.expand();
  REQUIRE(configs.size() == 4);
  CHECK(configs[1].scoring.cluster.distance_threshold == 0.5);
  CHECK(configs[2].scoring.cluster.linkage == cluster::Linkage::Average);
  CHECK_ERROR_CODE(parse_param_grid(R"({"linkage": "ward"})"), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(parse_param_grid(R"({"bogus": 1})"), ErrorCode::SchemaError);
  CHECK_ERROR_CODE(parse_param_grid(R"({"distance_threshold": []})"), ErrorCode::SchemaError);
}

TEST_CASE("benchmark output document") {
  const auto records = load_dataset(kSmoke);
  const embed::MockBackend mock;
  const auto rows = run_benchmark(records, {}, mock);
  const auto doc = io::benchmark_output_to_json(rows, {});
  CHECK(doc.at("rows").size() == 20);
  CHECK(doc.at("correlations").contains("pooled"));
  CHECK(doc.at("correlations").contains("per_topic_mean"));
  CHECK(doc.at("params").at("distance_threshold") == 0.38);
  CHECK(doc.at("errors").size() == 1);
}
