#include "kcpd/embed_client.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <thread>

#include "httplib.h"
#include "kcpd/error.hpp"

namespace kcpd {

namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint '" + url + "' must start with http:// or https://");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ValidationError("unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

struct PathStep {
  std::string key;               // empty: no object lookup
  std::optional<std::size_t> at;  // fixed array index
  bool batch_index = false;       // "[i]"
};

std::vector<PathStep> parse_path(const std::string& path) {
  std::vector<PathStep> steps;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const auto dot = path.find('.', pos);
    std::string part = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    PathStep step;
    const auto bracket = part.find('[');
    step.key = part.substr(0, bracket);
    if (bracket != std::string::npos) {
      if (part.back() != ']') throw ValidationError("bad vector path '" + path + "'");
      const std::string inside = part.substr(bracket + 1, part.size() - bracket - 2);
      if (inside == "i") {
        step.batch_index = true;
      } else {
        try {
          step.at = std::stoul(inside);
        } catch (const std::exception&) {
          throw ValidationError("bad index '" + inside + "' in vector path '" + path + "'");
        }
      }
    }
    if (step.key.empty() && !step.at && !step.batch_index) {
      throw ValidationError("empty segment in vector path '" + path + "'");
    }
    steps.push_back(step);
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return steps;
}

// Walks the path; when `batch_array_size` is set, stops at the "[i]" array
// and reports its length instead.
const json& walk(const json& body, const std::vector<PathStep>& steps, std::size_t index,
                 std::size_t* batch_array_size) {
  const json* node = &body;
  for (const PathStep& step : steps) {
    if (!step.key.empty()) {
      if (!node->is_object() || !node->contains(step.key)) {
        throw ValidationError("response has no field '" + step.key + "'");
      }
      node = &(*node)[step.key];
    }
    if (step.at || step.batch_index) {
      if (!node->is_array()) throw ValidationError("response field is not an array");
      if (step.batch_index && batch_array_size) {
        *batch_array_size = node->size();
        return *node;
      }
      const std::size_t i = step.at ? *step.at : index;
      if (i >= node->size()) throw ValidationError("response array is too short");
      node = &(*node)[i];
    }
  }
  return *node;
}

double backoff_delay(const EmbedServiceConfig& config, std::size_t attempt, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.0, 0.25);
  return config.backoff_base_seconds * std::pow(config.backoff_factor, static_cast<double>(attempt)) *
         (1.0 + jitter(rng));
}

class BatchFetcher {
 public:
  BatchFetcher(const EmbedServiceConfig& config, const std::string& token)
      : config_(config), endpoint_(split_url(config.endpoint)), steps_(parse_path(config.vector_path)),
        client_(endpoint_.origin) {
    const auto timeout = std::chrono::duration<double>(config.timeout_seconds);
    client_.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client_.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client_.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    headers_ = {{"Authorization", "Bearer " + token}};
  }

  std::vector<std::vector<double>> fetch(std::span<const std::string> texts, std::size_t batch_no,
                                         EmbedStats& stats) {
    json request;
    request["model"] = config_.model;
    request["input"] = std::vector<std::string>(texts.begin(), texts.end());
    const std::string payload = request.dump();
    std::mt19937_64 rng(0x656d6265ULL ^ batch_no);

    std::string last_problem;
    for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        ++stats.retries;
        std::this_thread::sleep_for(
            std::chrono::duration<double>(backoff_delay(config_, attempt - 1, rng)));
      }
      ++stats.requests;
      const auto res = client_.Post(endpoint_.path, headers_, payload, "application/json");
      if (!res) {
        last_problem = "connection failed (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_problem = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw ServiceError("embedding service returned HTTP " + std::to_string(res->status));
      }
      try {
        return parse(res->body, texts.size());
      } catch (const ValidationError& e) {
        throw ServiceError(std::string("unusable embedding response: ") + e.what());
      }
    }
    throw ServiceError("embedding request failed after " + std::to_string(config_.max_retries) +
                       " retries: " + last_problem);
  }

 private:
  std::vector<std::vector<double>> parse(const std::string& body_text, std::size_t expected) const {
    json body;
    try {
      body = json::parse(body_text);
    } catch (const json::parse_error&) {
      throw ValidationError("embedding service returned malformed JSON");
    }
    std::size_t returned = expected;
    walk(body, steps_, 0, &returned);
    if (returned != expected) {
      throw ValidationError("embedding service returned " + std::to_string(returned) +
                            " vectors for " + std::to_string(expected) + " inputs");
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(expected);
    for (std::size_t i = 0; i < expected; ++i) {
      const json& vec = walk(body, steps_, i, nullptr);
      if (!vec.is_array() || vec.empty()) {
        throw ValidationError("embedding " + std::to_string(i) + " is not a nonempty array");
      }
      std::vector<double> row;
      row.reserve(vec.size());
      for (const json& v : vec) {
        if (!v.is_number()) throw ValidationError("embedding contains a non-numeric value");
        row.push_back(v.get<double>());
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

  const EmbedServiceConfig& config_;
  Endpoint endpoint_;
  std::vector<PathStep> steps_;
  httplib::Client client_;
  httplib::Headers headers_;
};

}  // namespace

void EmbedServiceConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (parallel_connections < 1) throw ValidationError("parallel connections must be at least 1");
  if (!(timeout_seconds > 0.0)) throw ValidationError("timeout must be positive");
  if (!(backoff_base_seconds >= 0.0) || !(backoff_factor >= 1.0)) {
    throw ValidationError("backoff base must be >= 0 and factor >= 1");
  }
  if (token_env.empty()) throw ValidationError("token environment variable name is empty");
  split_url(endpoint);
  parse_path(vector_path);
}

const nlohmann::json& resolve_vector_path(const nlohmann::json& body, const std::string& path,
                                          std::size_t index) {
  return walk(body, parse_path(path), index, nullptr);
}

std::vector<std::vector<double>> fetch_embeddings(const EmbedServiceConfig& config,
                                                  const std::vector<std::string>& texts,
                                                  EmbedStats* stats) {
  config.validate();
  const char* token = std::getenv(config.token_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw ValidationError("environment variable " + config.token_env + " is not set");
  }
  if (texts.empty()) return {};

  const std::size_t batches = (texts.size() + config.batch_size - 1) / config.batch_size;
  std::vector<std::vector<std::vector<double>>> results(batches);
  std::vector<EmbedStats> batch_stats(batches);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    BatchFetcher fetcher(config, token);
    for (std::size_t b = next++; b < batches; b = next++) {
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const std::size_t first = b * config.batch_size;
      const std::size_t count = std::min(config.batch_size, texts.size() - first);
      try {
        results[b] = fetcher.fetch(std::span(texts).subspan(first, count), b, batch_stats[b]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t workers = std::min(config.parallel_connections, batches);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  if (stats) {
    for (const EmbedStats& s : batch_stats) {
      stats->requests += s.requests;
      stats->retries += s.retries;
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<std::vector<double>> rows;
  rows.reserve(texts.size());
  const std::size_t dim = results.front().front().size();
  for (auto& batch : results) {
    for (auto& row : batch) {
      if (row.size() != dim) {
        throw ServiceError("embedding dimension changed from " + std::to_string(dim) + " to " +
                              std::to_string(row.size()) + " across the response");
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace kcpd
