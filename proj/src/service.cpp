#include "misem/service.hpp"

#include <httplib.h>

#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "misem/backend_factory.hpp"
#include "misem/error.hpp"
#include "misem/projection.hpp"
#include "misem/report_json.hpp"

namespace misem::service {

using nlohmann::json;

namespace {

enum class JobStatus { Pending, Running, Done, Failed };

std::string to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Pending: return "pending";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "pending";
}

JobStatus parse_status(const std::string& s) {
  if (s == "done") return JobStatus::Done;
  if (s == "failed") return JobStatus::Failed;
  if (s == "running") return JobStatus::Running;
  return JobStatus::Pending;
}

struct Job {
  std::string id;
  JobStatus status = JobStatus::Pending;
  json request;
  std::string idempotency_key;
  std::string error_code;
  std::string error_message;
  std::shared_ptr<const ScoredSummary> result;
  std::string payload;  // frozen response body once done or failed
  std::map<std::string, std::pair<std::string, std::string>> projections;  // key -> (method used, body)
};

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t size) {
    for (std::size_t i = 0; i < size; ++i) {
      threads_.emplace_back([this](std::stop_token stop) { run(stop); });
    }
  }

  ~WorkerPool() {
    for (auto& t : threads_) t.request_stop();
    cv_.notify_all();
  }

  void submit(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      tasks_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

 private:
  void run(std::stop_token stop) {
    while (true) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        if (!cv_.wait(lock, stop, [this] { return !tasks_.empty(); })) return;
        task = std::move(tasks_.front());
        tasks_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable_any cv_;
  std::deque<std::function<void()>> tasks_;
  std::vector<std::jthread> threads_;
};

std::string new_uuid() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_int_distribution<int> nibble(0, 15);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id = "xxxxxxxx-xxxx-4xxx-yxxx-xxxxxxxxxxxx";
  for (char& c : id) {
    if (c == 'x') c = kHex[nibble(rng)];
    if (c == 'y') c = kHex[8 + nibble(rng) % 4];
  }
  return id;
}

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, json{{"code", code}, {"message", message}}.dump());
}

}  // namespace

ServiceConfig config_from_env(ServiceConfig base) {
  if (const char* port = std::getenv("MISEM_PORT")) base.port = std::atoi(port);
  if (const char* url = std::getenv("MISEM_EMBEDDER_URL")) base.embedder_spec = std::string("http:") + url;
  if (const char* path = std::getenv("MISEM_PERSIST_PATH")) base.persist_path = path;
  return base;
}

struct Service::Impl {
  ServiceConfig config;
  std::shared_ptr<const embed::Backend> backend;
  httplib::Server server;
  std::jthread listener;
  std::stop_source shutdown;

  std::mutex mutex;
  std::condition_variable changed;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::map<std::string, std::string> idempotency;
  std::mutex persist_mutex;
  std::unique_ptr<WorkerPool> pool;

  Impl(ServiceConfig c, std::shared_ptr<const embed::Backend> b)
      : config(std::move(c)), backend(std::move(b)) {
    std::size_t workers = config.workers;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    pool = std::make_unique<WorkerPool>(workers);
    restore();
    routes();
  }

  // ---- backends ----------------------------------------------------------------

  std::shared_ptr<const embed::Backend> backend_for(const json& request) const {
    const auto it = request.find("embedder");
    if (it == request.end() || it->get<std::string>() == config.embedder_spec) return backend;
    return embed::make_backend(it->get<std::string>());
  }

  // ---- jobs --------------------------------------------------------------------

  std::shared_ptr<Job> find(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(id);
    return it == jobs.end() ? nullptr : it->second;
  }

  static json job_json(const Job& job) {
    json j{{"job_id", job.id}, {"status", to_string(job.status)}, {"request", job.request}};
    if (job.status == JobStatus::Failed) {
      j["error"] = {{"code", job.error_code}, {"message", job.error_message}};
    }
    return j;
  }

  static std::shared_ptr<const ScoredSummary> compute(const json& request,
                                                      const embed::Backend& backend) {
    const auto config = io::pipeline_config_from_json(request.value("params", json::object()));
    const auto summary = request.at("summary_text").get<std::string>();
    if (request.contains("reference_sentences")) {
      const auto reference = request.at("reference_sentences").get<std::vector<std::string>>();
      const auto split = text::split_sentences({"summary", summary}, config.splitter);
      return std::make_shared<ScoredSummary>(
          score_sentences(reference, text::sentence_texts(split), config, backend));
    }
    const std::vector<text::Document> docs{{"reference", request.at("reference_text").get<std::string>()}};
    return std::make_shared<ScoredSummary>(score_texts(docs, summary, config, backend));
  }

  void run_job(const std::shared_ptr<Job>& job, std::shared_ptr<const embed::Backend> job_backend) {
    json request;
    {
      std::lock_guard lock(mutex);
      job->status = JobStatus::Running;
      request = job->request;
    }
    changed.notify_all();
    std::shared_ptr<const ScoredSummary> result;
    std::string code;
    std::string message;
    try {
      result = compute(request, *job_backend);
    } catch (const Error& e) {
      code = error_code_name(e.code());
      message = e.what();
    } catch (const std::exception& e) {
      code = "INTERNAL";
      message = e.what();
    }
    {
      std::lock_guard lock(mutex);
      if (result) {
        job->result = result;
        job->status = JobStatus::Done;
        json j = job_json(*job);
        j["report"] = io::score_report_to_json(*result);
        job->payload = j.dump();
      } else {
        job->status = JobStatus::Failed;
        job->error_code = code;
        job->error_message = message;
        job->payload = job_json(*job).dump();
      }
    }
    persist(*job);
    changed.notify_all();
  }

  // Restored jobs keep their frozen payload; the in-memory report is rebuilt on demand.
  std::shared_ptr<const ScoredSummary> ensure_result(const std::shared_ptr<Job>& job) {
    json request;
    {
      std::lock_guard lock(mutex);
      if (job->result) return job->result;
      request = job->request;
    }
    auto result = compute(request, *backend_for(request));
    std::lock_guard lock(mutex);
    if (!job->result) job->result = result;
    return job->result;
  }

  void persist(const Job& job) {
    if (!config.persist_path) return;
    json line{{"job_id", job.id},
              {"status", to_string(job.status)},
              {"request", job.request},
              {"idempotency_key", job.idempotency_key},
              {"payload", job.payload}};
    std::lock_guard lock(persist_mutex);
    std::ofstream out(*config.persist_path, std::ios::app | std::ios::binary);
    out << line.dump() << '\n';
  }

  void restore() {
    if (!config.persist_path) return;
    std::ifstream in(*config.persist_path, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = json::parse(line);
        auto job = std::make_shared<Job>();
        job->id = j.at("job_id").get<std::string>();
        job->status = parse_status(j.at("status").get<std::string>());
        job->request = j.at("request");
        job->idempotency_key = j.value("idempotency_key", "");
        job->payload = j.at("payload").get<std::string>();
        if (job->status == JobStatus::Failed) {
          const auto payload = json::parse(job->payload);
          job->error_code = payload.at("error").at("code").get<std::string>();
          job->error_message = payload.at("error").at("message").get<std::string>();
        }
        if (job->status != JobStatus::Done && job->status != JobStatus::Failed) continue;
        if (!job->idempotency_key.empty()) idempotency[job->idempotency_key] = job->id;
        jobs[job->id] = std::move(job);
      } catch (const json::exception&) {
        // A torn final line from an unclean shutdown; skip it.
      }
    }
  }

  // ---- handlers ----------------------------------------------------------------

  void post_evaluate(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send_error(res, 400, "INVALID_JSON", e.what());
    }
    if (!body.is_object()) return send_error(res, 400, "SCHEMA_ERROR", "body must be a JSON object");

    const bool has_text = body.contains("reference_text");
    const bool has_sentences = body.contains("reference_sentences");
    if (has_text == has_sentences) {
      return send_error(res, 400, "SCHEMA_ERROR",
                        "exactly one of reference_text or reference_sentences is required");
    }
    if (has_text && !body["reference_text"].is_string()) {
      return send_error(res, 400, "SCHEMA_ERROR", "reference_text must be a string");
    }
    if (has_sentences) {
      const auto& s = body["reference_sentences"];
      if (!s.is_array() || !std::all_of(s.begin(), s.end(), [](const json& v) { return v.is_string(); })) {
        return send_error(res, 400, "SCHEMA_ERROR", "reference_sentences must be an array of strings");
      }
    }
    if (!body.contains("summary_text") || !body["summary_text"].is_string()) {
      return send_error(res, 400, "SCHEMA_ERROR", "summary_text must be a string");
    }
    for (const auto& [key, value] : body.items()) {
      if (key != "reference_text" && key != "reference_sentences" && key != "summary_text" &&
          key != "params" && key != "embedder") {
        return send_error(res, 400, "SCHEMA_ERROR", "unknown field '" + key + "'");
      }
    }
    json request{{"summary_text", body["summary_text"]}};
    if (has_text) request["reference_text"] = body["reference_text"];
    if (has_sentences) request["reference_sentences"] = body["reference_sentences"];
    try {
      const auto config =
          io::pipeline_config_from_json(body.value("params", json::object()), config_defaults());
      request["params"] = io::pipeline_config_to_json(config);
    } catch (const Error& e) {
      return send_error(res, 400, "SCHEMA_ERROR", e.what());
    }
    if (body.contains("embedder")) {
      if (!body["embedder"].is_string()) return send_error(res, 400, "SCHEMA_ERROR", "embedder must be a string");
      const auto spec = body["embedder"].get<std::string>();
      if (spec != config.embedder_spec) {
        try {
          embed::validate_backend_spec(spec);
        } catch (const Error& e) {
          return send_error(res, 400, "SCHEMA_ERROR", e.what());
        }
        if (!spec.starts_with("mock:")) {
          return send_error(res, 400, "SCHEMA_ERROR",
                            "requests may only select mock embedders or the configured one");
        }
      }
      request["embedder"] = spec;
    }

    if (text::is_blank(request["summary_text"].get<std::string>())) {
      return send_error(res, 422, "EMPTY_SUMMARY", "summary_text is empty");
    }
    const bool reference_empty =
        has_text ? text::is_blank(request["reference_text"].get<std::string>())
                 : std::all_of(request["reference_sentences"].begin(), request["reference_sentences"].end(),
                               [](const json& v) { return text::is_blank(v.get<std::string>()); });
    if (reference_empty) return send_error(res, 422, "EMPTY_REFERENCE", "reference text is empty");
    if (has_sentences) {
      for (const auto& s : request["reference_sentences"]) {
        if (text::is_blank(s.get<std::string>())) {
          return send_error(res, 422, "EMPTY_SENTENCE", "reference_sentences contains an empty sentence");
        }
      }
    }

    const std::string key = req.get_header_value("Idempotency-Key");
    if (!key.empty()) {
      std::lock_guard lock(mutex);
      if (auto it = idempotency.find(key); it != idempotency.end()) {
        return send_json(res, 202, json{{"job_id", it->second}, {"status", to_string(jobs[it->second]->status)}}.dump());
      }
    }

    std::shared_ptr<const embed::Backend> job_backend;
    try {
      job_backend = backend_for(request);
    } catch (const Error& e) {
      return send_error(res, 400, "SCHEMA_ERROR", e.what());
    }
    const auto probe = job_backend->probe(std::chrono::seconds(1));
    if (!probe.reachable) {
      return send_error(res, 503, "EMBEDDER_UNAVAILABLE", "embedding backend unreachable: " + probe.error);
    }

    auto job = std::make_shared<Job>();
    job->request = std::move(request);
    job->idempotency_key = key;
    {
      std::lock_guard lock(mutex);
      if (!key.empty()) {
        // Lost a race with an identical request.
        if (auto it = idempotency.find(key); it != idempotency.end()) {
          return send_json(res, 202, json{{"job_id", it->second}, {"status", to_string(jobs[it->second]->status)}}.dump());
        }
      }
      do {
        job->id = new_uuid();
      } while (jobs.contains(job->id));
      jobs[job->id] = job;
      if (!key.empty()) idempotency[key] = job->id;
    }
    pool->submit([this, job, job_backend] { run_job(job, job_backend); });
    send_json(res, 202, json{{"job_id", job->id}, {"status", "pending"}}.dump());
  }

  PipelineConfig config_defaults() const { return config.defaults; }

  void get_job(const httplib::Request& req, httplib::Response& res) {
    auto job = find(req.matches[1]);
    if (!job) return send_error(res, 404, "UNKNOWN_JOB", "no job " + std::string(req.matches[1]));
    std::lock_guard lock(mutex);
    send_json(res, 200, job->payload.empty() ? job_json(*job).dump() : job->payload);
  }

  // Resolves a finished job or writes the 404/409 response.
  std::shared_ptr<Job> done_job(const httplib::Request& req, httplib::Response& res) {
    auto job = find(req.matches[1]);
    if (!job) {
      send_error(res, 404, "UNKNOWN_JOB", "no job " + std::string(req.matches[1]));
      return nullptr;
    }
    std::lock_guard lock(mutex);
    if (job->status != JobStatus::Done) {
      send_error(res, 409, "JOB_NOT_DONE", "job is " + to_string(job->status));
      return nullptr;
    }
    return job;
  }

  void get_projection(const httplib::Request& req, httplib::Response& res) {
    auto job = done_job(req, res);
    if (!job) return;
    projection::Method method = projection::Method::Tsne;
    projection::TsneOptions options;
    try {
      if (req.has_param("method")) method = projection::parse_method(req.get_param_value("method"));
      if (req.has_param("seed")) options.seed = std::stoull(req.get_param_value("seed"));
    } catch (const std::exception& e) {
      return send_error(res, 400, "BAD_PARAMETER", e.what());
    }
    const std::string cache_key = projection::to_string(method) + ":" + std::to_string(options.seed);
    {
      std::lock_guard lock(mutex);
      if (auto it = job->projections.find(cache_key); it != job->projections.end()) {
        res.set_header("X-Projection-Method", it->second.first);
        return send_json(res, 200, it->second.second);
      }
    }
    try {
      const auto result = ensure_result(job);
      const auto proj = projection::project(result->reference.embeddings, method, options,
                                            shutdown.get_token());
      const auto body = io::projection_to_json(proj.points, result->report.topic_model.assignments,
                                               result->reference.sentences)
                            .dump();
      std::lock_guard lock(mutex);
      auto [it, inserted] =
          job->projections.emplace(cache_key, std::pair{projection::to_string(proj.method_used), body});
      res.set_header("X-Projection-Method", it->second.first);
      send_json(res, 200, it->second.second);
    } catch (const Error& e) {
      send_error(res, e.code() == ErrorCode::ProviderUnavailable ? 503 : 500,
                 error_code_name(e.code()), e.what());
    }
  }

  void get_allocation(const httplib::Request& req, httplib::Response& res) {
    auto job = done_job(req, res);
    if (!job) return;
    std::size_t topic = 0;
    double threshold = 0.38;
    try {
      if (!req.has_param("topic")) return send_error(res, 400, "BAD_PARAMETER", "topic is required");
      std::size_t used = 0;
      const auto topic_str = req.get_param_value("topic");
      topic = std::stoul(topic_str, &used);
      if (used != topic_str.size()) throw std::invalid_argument("topic");
      if (req.has_param("threshold")) {
        const auto t = req.get_param_value("threshold");
        threshold = std::stod(t, &used);
        if (used != t.size()) throw std::invalid_argument("threshold");
      }
    } catch (const std::exception& e) {
      return send_error(res, 400, "BAD_PARAMETER", std::string("invalid query parameter: ") + e.what());
    }
    if (!(threshold >= -1.0 && threshold <= 1.0)) {
      return send_error(res, 400, "BAD_THRESHOLD", "threshold must lie in [-1, 1]");
    }
    try {
      const auto result = ensure_result(job);
      const auto tokens = scoring::token_topic_allocation(result->report, topic, threshold);
      json list = json::array();
      for (const auto& t : tokens) {
        list.push_back({{"index", t.token_index},
                        {"text", result->report.tokens[t.token_index].surface},
                        {"similarity", t.similarity}});
      }
      send_json(res, 200, json{{"topic", topic}, {"threshold", threshold}, {"tokens", std::move(list)}}.dump());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownTopic) return send_error(res, 404, "UNKNOWN_TOPIC", e.what());
      send_error(res, 500, error_code_name(e.code()), e.what());
    }
  }

  void get_sankey(const httplib::Request& req, httplib::Response& res) {
    auto job = done_job(req, res);
    if (!job) return;
    scoring::SankeyMode mode = scoring::SankeyMode::Soft;
    try {
      if (req.has_param("mode")) mode = scoring::parse_sankey_mode(req.get_param_value("mode"));
    } catch (const Error& e) {
      return send_error(res, 400, "BAD_PARAMETER", e.what());
    }
    try {
      const auto result = ensure_result(job);
      json edges = json::array();
      double total = 0.0;
      for (const auto& e : scoring::sankey_edges(result->report, mode)) {
        edges.push_back({{"topic", e.topic_id}, {"token", e.token_index}, {"weight", e.weight}});
        total += e.weight;
      }
      send_json(res, 200, json{{"mode", mode == scoring::SankeyMode::Soft ? "soft" : "argmax"},
                               {"edges", std::move(edges)},
                               {"total_weight", total},
                               {"token_count", result->report.token_count()}}
                              .dump());
    } catch (const Error& e) {
      send_error(res, 500, error_code_name(e.code()), e.what());
    }
  }

  void get_health(const httplib::Request&, httplib::Response& res) {
    const auto probe = backend->probe(std::chrono::seconds(1));
    json embedder{{"reachable", probe.reachable},
                  {"model", probe.model_name},
                  {"dim", probe.dim},
                  {"spec", config.embedder_spec}};
    if (!probe.error.empty()) embedder["error"] = probe.error;
    send_json(res, 200, json{{"status", "ok"}, {"embedder", std::move(embedder)}}.dump());
  }

  bool origin_allowed(const std::string& origin) const {
    return std::any_of(config.cors_allowlist.begin(), config.cors_allowlist.end(),
                       [&](const std::string& o) { return o == "*" || o == origin; });
  }

  void routes() {
    using httplib::Request;
    using httplib::Response;
    server.Post("/v1/evaluate", [this](const Request& q, Response& r) { post_evaluate(q, r); });
    server.Get(R"(/v1/jobs/([^/]+))", [this](const Request& q, Response& r) { get_job(q, r); });
    server.Get(R"(/v1/jobs/([^/]+)/projection)", [this](const Request& q, Response& r) { get_projection(q, r); });
    server.Get(R"(/v1/jobs/([^/]+)/allocation)", [this](const Request& q, Response& r) { get_allocation(q, r); });
    server.Get(R"(/v1/jobs/([^/]+)/sankey)", [this](const Request& q, Response& r) { get_sankey(q, r); });
    server.Get("/healthz", [this](const Request& q, Response& r) { get_health(q, r); });
    server.Options(R"(.*)", [](const Request&, Response& r) {
      r.status = 204;
      r.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      r.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key");
    });
    server.set_post_routing_handler([this](const Request& q, Response& r) {
      const auto origin = q.get_header_value("Origin");
      if (!origin.empty() && origin_allowed(origin)) {
        r.set_header("Access-Control-Allow-Origin", origin);
        r.set_header("Vary", "Origin");
      }
    });
    server.set_error_handler([](const Request& q, Response& r) {
      if (!r.body.empty()) return;
      if (r.status == 404) {
        send_error(r, 404, "NOT_FOUND", "no route for " + q.path);
      } else {
        send_error(r, r.status, "HTTP_ERROR", "request failed with status " + std::to_string(r.status));
      }
    });
    server.set_exception_handler([](const Request&, Response& r, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(r, 500, "INTERNAL", e.what());
      }
    });
  }
};

Service::Service(ServiceConfig config, std::shared_ptr<const embed::Backend> backend)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(backend))) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& cfg = impl_->config;
  if (cfg.port == 0) {
    cfg.port = impl_->server.bind_to_any_port(cfg.host);
  } else if (!impl_->server.bind_to_port(cfg.host, cfg.port)) {
    cfg.port = -1;
  }
  if (cfg.port <= 0) throw Error(ErrorCode::InvalidArgument, "cannot bind " + cfg.host);
  return cfg.port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

int Service::start() {
  const int port = bind();
  impl_->listener = std::jthread([this] { listen(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  impl_->shutdown.request_stop();
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  impl_->pool.reset();
}

bool Service::wait_for_job(const std::string& job_id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mutex);
  return impl_->changed.wait_for(lock, timeout, [&] {
    auto it = impl_->jobs.find(job_id);
    return it != impl_->jobs.end() && (it->second->status == JobStatus::Done ||
                                       it->second->status == JobStatus::Failed);
  });
}

}  // namespace misem::service
