#include "misem/http_backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <nlohmann/json.hpp>
#include <thread>

#include "misem/error.hpp"

namespace misem::embed {

using nlohmann::json;

namespace {

Matrix parse_vectors(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::ProviderUnavailable, what + ": 'vectors' is not an array");
  Matrix m;
  for (const auto& row : j) m.append_row(row.get<std::vector<double>>());
  return m;
}

httplib::Client make_client(const std::string& host, std::chrono::milliseconds timeout) {
  httplib::Client client(host);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  return client;
}

// Runs job(i) for i in [0, count) on at most `width` threads; rethrows the first failure.
template <typename Job>
void run_bounded(std::size_t count, std::size_t width, Job job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(width, 1, std::max<std::size_t>(count, 1));
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

HttpBackend::HttpBackend(std::string base_url, HttpBackendOptions options)
    : base_url_(std::move(base_url)), options_(options) {
  auto scheme_end = base_url_.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "embedder URL must include a scheme: " + base_url_);
  }
  auto path_start = base_url_.find('/', scheme_end + 3);
  host_ = base_url_.substr(0, path_start);
  if (path_start != std::string::npos) {
    prefix_ = base_url_.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
  if (options_.batch_size == 0) options_.batch_size = 1;
}

std::string HttpBackend::post_json(const std::string& path, const std::string& body) const {
  auto client = make_client(host_, options_.timeout);
  auto res = client.Post(prefix_ + path, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding sidecar at " + base_url_ + " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ProviderUnavailable, "embedding sidecar returned HTTP " +
                                                    std::to_string(res->status) + " for " + path +
                                                    ": " + res->body);
  }
  return res->body;
}

ProviderInfo HttpBackend::info() const {
  std::lock_guard lock(info_mutex_);
  if (info_) return *info_;
  auto client = make_client(host_, options_.timeout);
  auto res = client.Get(prefix_ + "/v1/info");
  if (!res || res->status != 200) {
    throw Error(ErrorCode::ProviderUnavailable, "embedding sidecar at " + base_url_ +
                                                    " did not answer /v1/info");
  }
  try {
    const auto j = json::parse(res->body);
    info_ = ProviderInfo{j.at("model").get<std::string>(), j.at("dim").get<std::size_t>(),
                         j.at("normalized").get<bool>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("bad /v1/info payload: ") + e.what());
  }
  return *info_;
}

ProbeResult HttpBackend::probe(std::chrono::milliseconds timeout) const {
  ProbeResult result;
  auto client = make_client(host_, timeout);
  auto res = client.Get(prefix_ + "/v1/info");
  if (!res) {
    result.error = httplib::to_string(res.error());
    return result;
  }
  if (res->status != 200) {
    result.error = "HTTP " + std::to_string(res->status);
    return result;
  }
  try {
    const auto j = json::parse(res->body);
    result.model_name = j.at("model").get<std::string>();
    result.dim = j.at("dim").get<std::size_t>();
    result.reachable = true;
  } catch (const json::exception& e) {
    result.error = e.what();
  }
  return result;
}

Matrix HttpBackend::sentence_vectors(const std::vector<std::string>& texts) const {
  const std::size_t dim = info().dim;
  const std::size_t batches = (texts.size() + options_.batch_size - 1) / options_.batch_size;
  std::vector<Matrix> results(batches);
  run_bounded(batches, options_.max_in_flight, [&](std::size_t b) {
    const auto first = texts.begin() + static_cast<std::ptrdiff_t>(b * options_.batch_size);
    const auto last = texts.begin() + static_cast<std::ptrdiff_t>(
                                          std::min(texts.size(), (b + 1) * options_.batch_size));
    const json request{{"texts", std::vector<std::string>(first, last)}};
    json response;
    try {
      response = json::parse(post_json("/v1/embed/sentences", request.dump()));
      if (response.at("dim").get<std::size_t>() != dim) {
        throw Error(ErrorCode::DimensionMismatch, "sidecar response dim differs from /v1/info dim");
      }
      results[b] = parse_vectors(response.at("vectors"), "/v1/embed/sentences");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProviderUnavailable, std::string("bad sentence payload: ") + e.what());
    }
    if (results[b].rows() != static_cast<std::size_t>(last - first)) {
      throw Error(ErrorCode::DimensionMismatch, "sidecar returned wrong number of sentence vectors");
    }
  });
  Matrix out;
  for (const auto& m : results) {
    for (std::size_t r = 0; r < m.rows(); ++r) out.append_row(m.row(r));
  }
  return out;
}

std::vector<TokenEmbedding> HttpBackend::token_vectors(
    const std::vector<std::string>& sentences) const {
  const std::size_t dim = info().dim;
  std::vector<TokenEmbedding> results(sentences.size());
  run_bounded(sentences.size(), options_.max_in_flight, [&](std::size_t i) {
    const json request{{"text", sentences[i]}};
    try {
      const auto response = json::parse(post_json("/v1/embed/tokens", request.dump()));
      results[i].tokens = response.at("tokens").get<std::vector<std::string>>();
      results[i].vectors = parse_vectors(response.at("vectors"), "/v1/embed/tokens");
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProviderUnavailable, std::string("bad token payload: ") + e.what());
    }
    if (!results[i].vectors.empty() && results[i].vectors.cols() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "sidecar token vectors differ from /v1/info dim");
    }
  });
  return results;
}

}  // namespace misem::embed
