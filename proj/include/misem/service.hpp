#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "misem/embedding.hpp"
#include "misem/pipeline.hpp"

namespace misem::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Spec of the default backend, echoed by /healthz. Requests may select a different
  /// "mock:" backend; any other override must equal this string.
  std::string embedder_spec = "mock:42";
  std::optional<std::filesystem::path> persist_path;
  /// Origins allowed by CORS. "*" allows any origin.
  std::vector<std::string> cors_allowlist{"*"};
  std::size_t workers = 0;  // 0 = hardware concurrency
  std::chrono::milliseconds embed_timeout{30000};
  PipelineConfig defaults;
};

/// Reads MISEM_PORT, MISEM_EMBEDDER_URL and MISEM_PERSIST_PATH over `base`.
ServiceConfig config_from_env(ServiceConfig base = {});

/// HTTP job service:
///   POST /v1/evaluate                   -> 202 {job_id}
///   GET  /v1/jobs/{id}                  -> job with report when done
///   GET  /v1/jobs/{id}/projection       ?method=tsne|pca&seed=
///   GET  /v1/jobs/{id}/allocation       ?topic=&threshold=
///   GET  /v1/jobs/{id}/sankey           ?mode=soft|argmax
///   GET  /healthz
class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<const embed::Backend> backend);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the bound port.
  int bind();
  /// Serves until stop(). Requires bind().
  void listen();
  /// bind() + listen() on a background thread; returns the bound port.
  int start();
  void stop();

  /// Blocks until the job leaves pending/running or the timeout expires. For tests.
  bool wait_for_job(const std::string& job_id, std::chrono::milliseconds timeout);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace misem::service
