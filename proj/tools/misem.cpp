// misem: score summaries, run benchmarks and sweeps, serve the HTTP API.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "misem/backend_factory.hpp"
#include "misem/benchmark.hpp"
#include "misem/cache_backend.hpp"
#include "misem/error.hpp"
#include "misem/http_backend.hpp"
#include "misem/pipeline.hpp"
#include "misem/report_json.hpp"
#include "misem/service.hpp"

namespace {

using namespace misem;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitInput = 3;
constexpr int kExitBackend = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::CacheMiss:
    case ErrorCode::MalformedCache:
    case ErrorCode::DimensionMismatch:
      return kExitBackend;
    default:
      return kExitInput;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Flag, then MISEM_EMBEDDER_URL, then the seeded mock.
std::string resolve_embedder(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* url = std::getenv("MISEM_EMBEDDER_URL"); url && *url) return std::string("http:") + url;
  return "mock:42";
}

struct ParamFlags {
  double distance_threshold = 0.38;
  std::string linkage = "complete";
  std::string softmax_axis = "per_token";
  bool no_normalize_sentences = false;
  bool no_normalize_tokens = false;
  bool drop_punctuation = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--distance-threshold", distance_threshold, "Cosine distance merge threshold, in (0, 2)")
        ->capture_default_str();
    cmd.add_option("--linkage", linkage, "complete | single | average")->capture_default_str();
    cmd.add_option("--softmax-axis", softmax_axis, "per_token | per_topic")->capture_default_str();
    cmd.add_flag("--no-normalize-sentences", no_normalize_sentences, "Keep raw sentence vector lengths");
    cmd.add_flag("--no-normalize-tokens", no_normalize_tokens, "Keep raw token vector lengths");
    cmd.add_flag("--drop-punctuation", drop_punctuation, "Ignore punctuation-only summary tokens");
  }

  PipelineConfig config() const {
    PipelineConfig c;
    try {
      c.scoring.cluster.distance_threshold = distance_threshold;
      c.scoring.cluster.linkage = cluster::parse_linkage(linkage);
      c.scoring.softmax_axis = scoring::parse_softmax_axis(softmax_axis);
      c.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    c.normalize_sentences = !no_normalize_sentences;
    c.normalize_tokens = !no_normalize_tokens;
    c.drop_punctuation_tokens = drop_punctuation;
    return c;
  }
};

std::unique_ptr<embed::Backend> open_backend(const std::string& spec) {
  try {
    embed::validate_backend_spec(spec);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return embed::make_backend(spec);
}

// ---- score ------------------------------------------------------------------------

struct ScoreArgs {
  std::vector<std::string> references;
  std::string summary;
  bool pre_split = false;
  std::string embedder;
  std::string report = "text";
  ParamFlags params;
};

std::string clip(const std::string& s, std::size_t width) {
  if (s.size() <= width) return s;
  std::size_t cut = width - 3;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut) + "...";
}

void print_text_report(const ScoredSummary& scored) {
  const auto& report = scored.report;
  std::printf("score: %.6f\n", report.final_score);
  std::printf("topics: %zu  tokens: %zu  reference sentences: %zu\n", report.topic_count(),
              report.token_count(), scored.reference.sentences.size());
  std::printf("%-6s %-9s %-9s %s\n", "topic", "weight", "score", "members");
  for (std::size_t t = 0; t < report.topic_count(); ++t) {
    const auto& members = report.topic_model.topics[t].member_indices;
    std::printf("%-6zu %.6f  %.6f  %zu\n", t, report.weights[t], report.topic_scores[t], members.size());
    const std::size_t shown = std::min<std::size_t>(members.size(), 3);
    for (std::size_t k = 0; k < shown; ++k) {
      std::printf("         [%zu] %s\n", members[k], clip(scored.reference.sentences[members[k]].text, 100).c_str());
    }
    if (members.size() > shown) std::printf("         ... %zu more\n", members.size() - shown);
  }
}

int run_score(const ScoreArgs& args) {
  auto config = args.params.config();
  if (args.report != "text" && args.report != "json") throw UsageError("--report must be json or text");
  if (args.pre_split) config.splitter.mode = text::SplitMode::Lines;
  const auto backend = open_backend(resolve_embedder(args.embedder));

  std::vector<text::Document> docs;
  for (const auto& path : args.references) {
    const auto contents = read_file(path);
    if (args.pre_split) {
      const auto stem = std::filesystem::path(path).filename().string() + "#";
      for (auto& d : text::parse_pre_split(contents, stem)) docs.push_back(std::move(d));
    } else {
      docs.push_back({path, contents});
    }
  }
  const auto summary = read_file(args.summary);
  const auto scored = score_texts(docs, summary, config, *backend);

  if (scored.report.degenerate()) {
    std::fprintf(stderr, "warning: the reference forms a single topic, so the score is 1 by construction\n");
  }
  if (args.report == "json") {
    std::cout << io::score_report_to_json(scored).dump(2) << '\n';
  } else {
    print_text_report(scored);
  }
  return 0;
}

// ---- benchmark / sweep ------------------------------------------------------------

struct BenchArgs {
  std::string dataset;
  std::string out;
  std::string aggregation = "pooled";
  std::string embedder;
  std::string expect_shape;
  std::size_t workers = 0;
  ParamFlags params;
};

bench::Aggregation aggregation_flag(const std::string& name) {
  try {
    return bench::parse_aggregation(name);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

void write_output(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw InputError("failed writing " + path);
}

void warn_shape(const std::vector<bench::BenchmarkRecord>& records, const std::string& shape) {
  if (shape.empty()) return;
  bench::DatasetShape expected;
  if (shape == "tac08") {
    expected = bench::kTac08Shape;
  } else if (shape == "tac09") {
    expected = bench::kTac09Shape;
  } else {
    throw UsageError("--expect-shape must be tac08 or tac09");
  }
  for (const auto& w : bench::check_dataset_shape(records, expected)) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_benchmark_cmd(const BenchArgs& args) {
  const auto config = args.params.config();
  const auto aggregation = aggregation_flag(args.aggregation);
  const auto backend = open_backend(resolve_embedder(args.embedder));
  const auto records = bench::load_dataset(args.dataset);
  warn_shape(records, args.expect_shape);

  const auto rows = bench::run_benchmark(records, config, *backend, {args.workers});
  if (!args.out.empty()) write_output(args.out, io::benchmark_output_to_json(rows, config));

  std::size_t scored = 0;
  std::size_t backend_failures = 0;
  for (const auto& row : rows) {
    if (row.misem_score) {
      ++scored;
    } else {
      std::fprintf(stderr, "error: %s/%s: %s\n", row.topic_id.c_str(), row.system_id.c_str(), row.error.c_str());
      if (row.error.find("PROVIDER_UNAVAILABLE") != std::string::npos ||
          row.error.find("CACHE_MISS") != std::string::npos) {
        ++backend_failures;
      }
    }
  }
  try {
    const auto c = bench::correlate(rows, aggregation);
    std::printf("%s: r=%.6f rho=%.6f tau=%.6f n=%zu scored=%zu/%zu\n", bench::to_string(aggregation).c_str(),
                c.pearson_r, c.spearman_rho, c.kendall_tau, c.n_pairs, scored, rows.size());
  } catch (const Error& e) {
    std::fprintf(stderr, "error: cannot correlate: %s\n", e.what());
  }
  if (rows.empty() || static_cast<double>(scored) < 0.9 * static_cast<double>(rows.size())) {
    std::fprintf(stderr, "error: only %zu of %zu summaries were scored\n", scored, rows.size());
    return backend_failures * 2 > rows.size() - scored ? kExitBackend : kExitInput;
  }
  return 0;
}

struct SweepArgs {
  std::string dataset;
  std::string grid;
  std::string out;
  std::string aggregation = "pooled";
  std::string embedder;
  std::size_t workers = 0;
};

std::string fmt(double v) {
  if (!std::isfinite(v)) return "      nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%9.6f", v);
  return buf;
}

int run_sweep(const SweepArgs& args) {
  const auto rank_by = aggregation_flag(args.aggregation);
  const auto backend = open_backend(resolve_embedder(args.embedder));
  const auto grid = bench::parse_param_grid(read_file(args.grid));
  const auto records = bench::load_dataset(args.dataset);
  const auto rows = bench::grid_search(records, grid, *backend, rank_by, {}, {args.workers});
  if (!args.out.empty()) write_output(args.out, io::grid_rows_to_json(rows));

  std::printf("%-4s %-8s %-9s %-9s %-5s %-5s %9s %9s %9s %6s\n", "rank", "linkage", "threshold", "axis",
              "nsent", "ntok", "r", "rho", "tau", "errors");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const auto& c = rank_by == bench::Aggregation::Pooled ? row.pooled : row.per_topic_mean;
    std::printf("%-4zu %-8s %-9.4f %-9s %-5s %-5s %s %s %s %6zu\n", i + 1,
                cluster::to_string(row.config.scoring.cluster.linkage).c_str(),
                row.config.scoring.cluster.distance_threshold,
                scoring::to_string(row.config.scoring.softmax_axis).c_str(),
                row.config.normalize_sentences ? "yes" : "no", row.config.normalize_tokens ? "yes" : "no",
                fmt(c.pearson_r).c_str(), fmt(c.spearman_rho).c_str(), fmt(c.kendall_tau).c_str(), row.errors);
  }
  return 0;
}

// ---- serve ------------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  std::optional<int> port;
  std::string embedder;
  std::string persist;
  std::vector<std::string> cors;
  std::size_t workers = 0;
  double embed_timeout = 30.0;
};

int run_serve(const ServeArgs& args) {
  auto config = service::config_from_env();
  config.host = args.host;
  if (args.port) config.port = *args.port;
  if (!args.embedder.empty()) config.embedder_spec = args.embedder;
  if (!args.persist.empty()) config.persist_path = args.persist;
  if (!args.cors.empty()) config.cors_allowlist = args.cors;
  config.workers = args.workers;
  if (!(args.embed_timeout > 0)) throw UsageError("--embed-timeout must be positive");
  config.embed_timeout = std::chrono::milliseconds(static_cast<long long>(args.embed_timeout * 1000));

  std::shared_ptr<const embed::Backend> backend;
  try {
    embed::validate_backend_spec(config.embedder_spec);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (config.embedder_spec.starts_with("http:")) {
    embed::HttpBackendOptions options;
    options.timeout = config.embed_timeout;
    backend = std::make_shared<embed::HttpBackend>(config.embedder_spec.substr(5), options);
  } else {
    backend = embed::make_backend(config.embedder_spec);
  }

  // Block the shutdown signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::Service svc(config, backend);
  const int port = svc.start();
  std::printf("listening on http://%s:%d (embedder %s)\n", config.host.c_str(), port, config.embedder_spec.c_str());
  std::fflush(stdout);

  int received = 0;
  sigwait(&signals, &received);
  std::fprintf(stderr, "received %s, shutting down\n", received == SIGINT ? "SIGINT" : "SIGTERM");
  svc.stop();
  return 0;
}

// ---- export-cache -----------------------------------------------------------------

struct ExportArgs {
  std::vector<std::string> references;
  std::vector<std::string> summaries;
  bool pre_split = false;
  std::string embedder;
  std::string out;
};

int run_export(const ExportArgs& args) {
  const auto backend = open_backend(resolve_embedder(args.embedder));
  text::SplitterChoice splitter;
  if (args.pre_split) splitter.mode = text::SplitMode::Lines;
  std::vector<std::string> sentences;
  for (const auto& path : args.references) {
    const auto contents = read_file(path);
    const auto docs = args.pre_split ? text::parse_pre_split(contents) : std::vector<text::Document>{{path, contents}};
    for (auto& s : text::sentence_texts(text::merge_reference_documents(docs, splitter))) sentences.push_back(std::move(s));
  }
  std::vector<std::string> summary_sentences;
  for (const auto& path : args.summaries) {
    for (auto& s : text::sentence_texts(text::split_sentences({path, read_file(path)}, splitter))) {
      summary_sentences.push_back(std::move(s));
    }
  }
  const auto items = embed::collect_cache_items(*backend, sentences, summary_sentences);
  embed::write_embedding_cache(backend->info(), items, args.out);
  std::printf("wrote %zu entries to %s\n", items.size(), args.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic-weighted summary evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "misem 1.0.0");

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score one summary against reference documents");
  score_cmd->add_option("--reference", score.references, "Reference document file(s)")->required()->expected(1, -1);
  score_cmd->add_option("--summary", score.summary, "Summary file")->required();
  score_cmd->add_flag("--pre-split", score.pre_split, "Inputs hold one sentence per line, blank line between documents");
  score_cmd->add_option("--embedder", score.embedder, "mock:<seed>[:<dim>] | cache:<path> | http:<url>");
  score_cmd->add_option("--report", score.report, "json | text")->capture_default_str();
  score.params.add_to(*score_cmd);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("benchmark", "Correlate scores with human ratings over a dataset");
  bench_cmd->add_option("--dataset", bench_args.dataset, "JSONL dataset")->required();
  bench_cmd->add_option("--out", bench_args.out, "Write the full result JSON here");
  bench_cmd->add_option("--aggregation", bench_args.aggregation, "pooled | per-topic")->capture_default_str();
  bench_cmd->add_option("--embedder", bench_args.embedder, "mock:<seed>[:<dim>] | cache:<path> | http:<url>");
  bench_cmd->add_option("--expect-shape", bench_args.expect_shape, "Warn unless the dataset matches tac08 | tac09");
  bench_cmd->add_option("--workers", bench_args.workers, "Worker threads, 0 = all cores");
  bench_args.params.add_to(*bench_cmd);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over scoring parameters");
  sweep_cmd->add_option("--dataset", sweep.dataset, "JSONL dataset")->required();
  sweep_cmd->add_option("--grid", sweep.grid, "JSON parameter grid")->required();
  sweep_cmd->add_option("--out", sweep.out, "Write the ranked table as JSON here");
  sweep_cmd->add_option("--aggregation", sweep.aggregation, "Rank by pooled | per-topic")->capture_default_str();
  sweep_cmd->add_option("--embedder", sweep.embedder, "mock:<seed>[:<dim>] | cache:<path> | http:<url>");
  sweep_cmd->add_option("--workers", sweep.workers, "Worker threads, 0 = all cores");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API until SIGINT or SIGTERM");
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", serve.port, "Port, 0 picks a free one (default MISEM_PORT or 8080)");
  serve_cmd->add_option("--embedder", serve.embedder, "mock:<seed>[:<dim>] | cache:<path> | http:<url>");
  serve_cmd->add_option("--persist", serve.persist, "Append finished jobs to this JSONL file (default MISEM_PERSIST_PATH)");
  serve_cmd->add_option("--cors-origin", serve.cors, "Allowed CORS origin, repeatable (default any)");
  serve_cmd->add_option("--workers", serve.workers, "Evaluation workers, 0 = all cores");
  serve_cmd->add_option("--embed-timeout", serve.embed_timeout, "Seconds to wait on the embedding sidecar")->capture_default_str();

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-cache", "Write an embedding cache file for the given texts");
  export_cmd->add_option("--reference", export_args.references, "Reference document file(s)")->expected(1, -1);
  export_cmd->add_option("--summary", export_args.summaries, "Summary file(s)")->expected(1, -1);
  export_cmd->add_flag("--pre-split", export_args.pre_split, "Inputs hold one sentence per line");
  export_cmd->add_option("--embedder", export_args.embedder, "Backend to query");
  export_cmd->add_option("--out", export_args.out, "Cache file to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (score_cmd->parsed()) return run_score(score);
    if (bench_cmd->parsed()) return run_benchmark_cmd(bench_args);
    if (sweep_cmd->parsed()) return run_sweep(sweep);
    if (serve_cmd->parsed()) return run_serve(serve);
    if (export_cmd->parsed()) return run_export(export_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    std::fprintf(stderr, "%s: %s: %s\n", code == kExitBackend ? "backend error" : code == kExitUsage ? "usage error" : "input error",
                 std::string(error_code_name(e.code())).c_str(), e.what());
    return code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
