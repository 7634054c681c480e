// Acceptance gate: one PASS/FAIL/SKIP line per criterion; non-zero exit if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "misem/benchmark.hpp"
#include "misem/clustering.hpp"
#include "misem/correlation.hpp"
#include "misem/error.hpp"
#include "misem/http_backend.hpp"
#include "misem/mock_backend.hpp"
#include "misem/pipeline.hpp"
#include "misem/scoring.hpp"
#include "misem/service.hpp"
#include "oracle/naive_misem.hpp"
#include "support/instances.hpp"
#include "support/process.hpp"

namespace {

using namespace misem;
using Clock = std::chrono::steady_clock;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

/// Collects the first few failure descriptions.
struct Failures {
  std::size_t count = 0;
  std::string first;
  void add(const std::string& what) {
    if (count++ == 0) first = what;
  }
  bool any() const { return count > 0; }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

scoring::ScoringParams params_at(double threshold) {
  scoring::ScoringParams p;
  p.cluster.distance_threshold = threshold;
  return p;
}

Outcome fail_or_pass(const Failures& f, const std::string& ok_detail) {
  if (f.any()) return {Status::Fail, fmt("%zu failure(s); first: %s", f.count, f.first.c_str())};
  return {Status::Pass, ok_detail};
}

// ---- criteria ---------------------------------------------------------------------

Outcome oracle_equivalence() {
  std::mt19937_64 rng(1001);
  Failures f;
  double worst = 0.0;
  const auto start = Clock::now();
  for (int i = 0; i < 1000; ++i) {
    const auto inst = testing_support::random_instance(rng);
    const auto emb = testing_support::embed_instance(inst);
    const double m = scoring::evaluate(emb.reference, emb.summary, params_at(inst.threshold)).final_score;
    const double expected = oracle::naive_misem(emb.reference.embeddings.to_rows(), emb.summary.embeddings.to_rows(),
                                                inst.threshold).m;
    const double diff = std::abs(m - expected);
    worst = std::max(worst, diff);
    if (!(diff <= 1e-9)) f.add(fmt("instance %d: %.17g vs %.17g", i, m, expected));
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 60.0) f.add(fmt("took %.1f s", elapsed));
  return fail_or_pass(f, fmt("1000 instances, max |diff| %.3g, %.2f s", worst, elapsed));
}

bool distances_distinct(const Matrix& x) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) d.push_back(cluster::cosine_distance(x.row(i), x.row(j)));
  }
  std::sort(d.begin(), d.end());
  for (std::size_t k = 1; k < d.size(); ++k) {
    if (d[k] - d[k - 1] < 1e-9) return false;
  }
  return true;
}

Outcome clustering_oracle() {
  std::mt19937_64 rng(2002);
  std::normal_distribution<double> normal;
  Failures f;
  const auto start = Clock::now();
  int done = 0;
  std::size_t merged_instances = 0;
  while (done < 500) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const auto dim = std::uniform_int_distribution<std::size_t>(2, 32)(rng);
    Matrix x(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) x(i, d) = normal(rng);
    }
    if (!distances_distinct(x)) continue;
    cluster::ClusterParams params;
    params.distance_threshold = std::uniform_real_distribution<double>(0.1, 1.8)(rng);
    const auto got = oracle::canonical(cluster::agglomerative_cluster(x, params));
    const auto expected = oracle::naive_cluster(x.to_rows(), params.distance_threshold);
    if (got != expected) f.add(fmt("instance %d (n=%zu)", done, n));
    if (got.size() > 1 && got.size() < n) ++merged_instances;
    ++done;
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 30.0) f.add(fmt("took %.1f s", elapsed));
  return fail_or_pass(f, fmt("500 instances (%zu with partial merges), %.2f s", merged_instances, elapsed));
}

Outcome conservation() {
  std::mt19937_64 rng(3003);
  Failures f;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = testing_support::random_instance(rng);
    const auto emb = testing_support::embed_instance(inst);
    const auto r = scoring::evaluate(emb.reference, emb.summary, params_at(inst.threshold));
    const auto k = r.topic_count();
    const auto n = r.token_count();
    for (std::size_t c = 0; c < n; ++c) {
      double col = 0;
      for (std::size_t t = 0; t < k; ++t) col += r.softmaxed.values(t, c);
      if (!(std::abs(col - 1.0) <= 1e-9)) f.add(fmt("instance %d column %zu sums to %.17g", i, c, col));
    }
    const double mass = std::accumulate(r.raw_topic_sums.begin(), r.raw_topic_sums.end(), 0.0);
    if (!(std::abs(mass - static_cast<double>(n)) <= 1e-6)) f.add(fmt("instance %d topic mass %.17g vs %zu", i, mass, n));
    const double w = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
    if (!(std::abs(w - 1.0) <= 1e-9)) f.add(fmt("instance %d sum W %.17g", i, w));
    const double s = std::accumulate(r.topic_scores.begin(), r.topic_scores.end(), 0.0);
    if (!(std::abs(s - 1.0) <= 1e-9)) f.add(fmt("instance %d sum S %.17g", i, s));
    if (!(r.final_score > 0.0 && r.final_score <= 1.0)) f.add(fmt("instance %d m=%.17g", i, r.final_score));
    if ((k == 1) != (r.final_score == 1.0)) f.add(fmt("instance %d: %zu topics but m=%.17g", i, k, r.final_score));
  }
  return fail_or_pass(f, "1000 instances");
}

Outcome invariance() {
  std::mt19937_64 rng(4004);
  Failures f;
  double worst_perm = 0, worst_scale = 0;
  for (int i = 0; i < 300; ++i) {
    const auto inst = testing_support::random_instance(rng);
    const auto emb = testing_support::embed_instance(inst);
    const auto params = params_at(inst.threshold);
    const double base = scoring::evaluate(emb.reference, emb.summary, params).final_score;

    std::vector<std::size_t> perm(emb.summary.embeddings.rows());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto shuffled = emb.summary;
    for (std::size_t r = 0; r < perm.size(); ++r) {
      const auto src = emb.summary.embeddings.row(perm[r]);
      std::copy(src.begin(), src.end(), shuffled.embeddings.row(r).begin());
    }
    const double permuted = scoring::evaluate(emb.reference, shuffled, params).final_score;
    worst_perm = std::max(worst_perm, std::abs(permuted - base));
    if (!(std::abs(permuted - base) <= 1e-12)) f.add(fmt("instance %d permutation diff %.3g", i, std::abs(permuted - base)));

    for (double c : {0.5, 3.0, 100.0}) {
      auto ref = emb.reference;
      auto sum = emb.summary;
      for (auto* m : {&ref.embeddings, &sum.embeddings}) {
        for (std::size_t r = 0; r < m->rows(); ++r) {
          for (auto& v : m->row(r)) v *= c;
        }
      }
      const double scaled = scoring::evaluate(ref, sum, params).final_score;
      worst_scale = std::max(worst_scale, std::abs(scaled - base));
      if (!(std::abs(scaled - base) <= 1e-12)) f.add(fmt("instance %d scale %.1f diff %.3g", i, c, std::abs(scaled - base)));
    }

    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (int step = 0; step < 10; ++step) {
      cluster::ClusterParams cp;
      cp.distance_threshold = 0.1 + 0.18 * step;
      const auto k = cluster::build_topic_model(emb.reference.embeddings, cp).topic_count();
      if (k > previous) f.add(fmt("instance %d: %zu topics at threshold %.2f after %zu", i, k, cp.distance_threshold, previous));
      previous = k;
    }
  }
  return fail_or_pass(f, fmt("300 instances, max permutation diff %.3g, max scale diff %.3g", worst_perm, worst_scale));
}

Outcome correlation_statistics() {
  using V = std::vector<double>;
  Failures f;
  auto expect = [&](const char* what, double got, double want) {
    if (got != want) f.add(fmt("%s = %.17g, closed form %.17g", what, got, want));
  };
  expect("pearson([1,2,3],[2,4,6])", stats::pearson(V{1, 2, 3}, V{2, 4, 6}), 1.0);
  expect("pearson([1,2,3],[3,2,1])", stats::pearson(V{1, 2, 3}, V{3, 2, 1}), -1.0);
  expect("spearman([1,2,3],[3,2,1])", stats::spearman(V{1, 2, 3}, V{3, 2, 1}), -1.0);
  expect("kendall([1,2,3],[3,2,1])", stats::kendall_tau_b(V{1, 2, 3}, V{3, 2, 1}), -1.0);
  expect("kendall([1,2,3],[1,3,2])", stats::kendall_tau_b(V{1, 2, 3}, V{1, 3, 2}), 1.0 / 3.0);
  expect("spearman([1,2,3],[1,3,2])", stats::spearman(V{1, 2, 3}, V{1, 3, 2}), 0.5);
  expect("pearson([1..5],[2,1,4,3,5])", stats::pearson(V{1, 2, 3, 4, 5}, V{2, 1, 4, 3, 5}), 0.8);
  expect("spearman([1..5],[2,1,4,3,5])", stats::spearman(V{1, 2, 3, 4, 5}, V{2, 1, 4, 3, 5}), 0.8);
  expect("kendall([1..5],[2,1,4,3,5])", stats::kendall_tau_b(V{1, 2, 3, 4, 5}, V{2, 1, 4, 3, 5}), 0.6);
  expect("kendall([1,2,2,3],[1,2,3,4])", stats::kendall_tau_b(V{1, 2, 2, 3}, V{1, 2, 3, 4}), 5.0 / std::sqrt(30.0));
  expect("kendall([1,2,2,3],[1,2,2,3])", stats::kendall_tau_b(V{1, 2, 2, 3}, V{1, 2, 2, 3}), 1.0);

  std::mt19937_64 rng(5005);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> coarse(0, 5);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 3 + static_cast<std::size_t>(i % 40);
    V x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = i % 3 == 0 ? coarse(rng) : normal(rng);
      y[k] = i % 5 == 0 ? coarse(rng) : normal(rng);
    }
    V fx, gy;
    for (double v : x) fx.push_back(std::exp(0.5 * v) + 3.0);
    for (double v : y) gy.push_back(-1.0 / (1.0 + std::exp(-v)));  // decreasing
    try {
      const double rho = stats::spearman(x, y);
      const double tau = stats::kendall_tau_b(x, y);
      if (stats::spearman(fx, y) != rho) f.add(fmt("vector %d: spearman changed under increasing map", i));
      if (stats::kendall_tau_b(fx, y) != tau) f.add(fmt("vector %d: kendall changed under increasing map", i));
      if (stats::spearman(x, gy) != -rho) f.add(fmt("vector %d: spearman not negated under decreasing map", i));
      if (stats::kendall_tau_b(x, gy) != -tau) f.add(fmt("vector %d: kendall not negated under decreasing map", i));
      ++checked;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConstantInput) f.add(fmt("vector %d: %s", i, e.what()));
    }
  }
  return fail_or_pass(f, fmt("11 closed forms, %d transformed vector pairs", checked));
}

Outcome degenerate_cases() {
  Failures f;
  const embed::MockBackend mock(42);
  const auto single = score_sentences({"Only one reference sentence here."}, {"A summary of it.", "With two sentences."}, {}, mock);
  if (single.report.final_score != 1.0) f.add(fmt("single sentence m=%.17g", single.report.final_score));
  try {
    score_sentences({"A reference."}, {}, {}, mock);
    f.add("empty summary did not throw");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySummary) f.add(std::string("empty summary threw ") + std::string(error_code_name(e.code())));
  }
  try {
    score_texts({{"r", "A reference."}}, "   ", {}, mock);
    f.add("blank summary text did not throw");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptySummary) f.add(std::string("blank summary threw ") + std::string(error_code_name(e.code())));
  }
  for (double t : {1e-9, 0.38, 1.99}) {
    PipelineConfig config;
    config.scoring.cluster.distance_threshold = t;
    const auto same = score_sentences(std::vector<std::string>(7, "The same sentence again."), {"Anything at all."}, config, mock);
    if (same.report.topic_count() != 1) f.add(fmt("identical sentences gave %zu topics at %.2g", same.report.topic_count(), t));
  }
  return fail_or_pass(f, "single sentence, empty summary, identical sentences");
}

Outcome tac_reproduction(const char* env_dataset, double target, const char* label) {
  const char* dataset = std::getenv(env_dataset);
  const char* url = std::getenv("MISEM_EMBEDDER_URL");
  if (!dataset || !*dataset || !url || !*url) {
    return {Status::Skip, fmt("set %s and MISEM_EMBEDDER_URL to run", env_dataset)};
  }
  try {
    const embed::HttpBackend backend(url);
    const auto records = bench::load_dataset(dataset);
    std::string warnings;
    for (const auto& w : bench::check_dataset_shape(records, std::string(label) == "TAC'08" ? bench::kTac08Shape : bench::kTac09Shape)) {
      warnings += "; " + w;
    }
    const auto rows = bench::run_benchmark(records, {}, backend);
    const auto pooled = bench::correlate(rows, bench::Aggregation::Pooled);
    const auto per_topic = bench::correlate(rows, bench::Aggregation::PerTopicMean);
    const bool ok = std::abs(pooled.pearson_r - target) <= 0.03 || std::abs(per_topic.pearson_r - target) <= 0.03;
    return {ok ? Status::Pass : Status::Fail,
            fmt("pooled r=%.3f, per-topic r=%.3f, target %.3f +- 0.03%s", pooled.pearson_r, per_topic.pearson_r, target,
                warnings.c_str())};
  } catch (const std::exception& e) {
    return {Status::Fail, e.what()};
  }
}

Outcome cross_interface() {
  const std::string data = MISEM_DATA_DIR;
  const std::string ref_path = data + "/samples/reference.txt";
  const std::string sum_path = data + "/samples/summary.txt";
  const auto cli = testing_support::run_process(
      {MISEM_CLI_PATH, "score", "--reference", ref_path, "--summary", sum_path, "--embedder", "mock:42", "--report", "json"});
  if (cli.exit_code != 0) return {Status::Fail, "CLI exited with " + std::to_string(cli.exit_code) + ": " + cli.err};
  const auto cli_report = nlohmann::json::parse(cli.out);

  service::ServiceConfig config;
  config.port = 0;
  config.embedder_spec = "mock:42";
  service::Service svc(config, std::make_shared<embed::MockBackend>(42));
  const int port = svc.start();
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);
  const nlohmann::json body{{"reference_text", testing_support::slurp(ref_path)},
                            {"summary_text", testing_support::slurp(sum_path)}};
  auto posted = client.Post("/v1/evaluate", body.dump(), "application/json");
  if (!posted || posted->status != 202) return {Status::Fail, "service did not accept the job"};
  const auto id = nlohmann::json::parse(posted->body).at("job_id").get<std::string>();
  if (!svc.wait_for_job(id, std::chrono::seconds(60))) return {Status::Fail, "job did not finish"};
  const auto job = nlohmann::json::parse(client.Get("/v1/jobs/" + id)->body);
  svc.stop();
  if (job.at("status") != "done") return {Status::Fail, "job status " + job.at("status").get<std::string>()};
  const auto& service_report = job.at("report");
  const double a = cli_report.at("score").get<double>();
  const double b = service_report.at("score").get<double>();
  if (!(std::abs(a - b) <= 1e-12)) return {Status::Fail, fmt("CLI %.17g vs service %.17g", a, b)};
  if (cli_report != service_report) return {Status::Fail, "scores agree but the reports differ"};
  return {Status::Pass, fmt("score %.12f, reports identical", a)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"oracle-equivalence", oracle_equivalence},
      {"clustering-oracle", clustering_oracle},
      {"conservation", conservation},
      {"invariance", invariance},
      {"correlation-statistics", correlation_statistics},
      {"degenerate-cases", degenerate_cases},
      {"tac08-reproduction", [] { return tac_reproduction("MISEM_TAC08_DATASET", 0.404, "TAC'08"); }},
      {"tac09-reproduction", [] { return tac_reproduction("MISEM_TAC09_DATASET", 0.349, "TAC'09"); }},
      {"cross-interface", cross_interface},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {Status::Fail, std::string("uncaught: ") + e.what()};
    }
    const char* tag = outcome.status == Status::Pass ? "PASS" : outcome.status == Status::Fail ? "FAIL" : "SKIP";
    if (outcome.status == Status::Fail) ++failures;
    std::printf("%s %s: %s\n", tag, c.name, outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
