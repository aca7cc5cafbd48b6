#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace kcpd {

/// Connection settings for an OpenAI-style embedding endpoint.
struct EmbedServiceConfig {
  std::string endpoint;  // full URL, e.g. https://api.openai.com/v1/embeddings
  std::string model = "text-embedding-3-small";
  std::string token_env = "OPENAI_API_KEY";  // name of the variable, never the token
  std::size_t batch_size = 100;
  std::size_t max_retries = 5;
  double timeout_seconds = 60.0;
  /// Where each vector lives in the response; "[i]" stands for the input
  /// position within the batch.
  std::string vector_path = "data[i].embedding";
  double backoff_base_seconds = 1.0;
  double backoff_factor = 2.0;
  std::size_t parallel_connections = 1;

  void validate() const;
};

/// Request/retry counters, mostly for tests.
struct EmbedStats {
  std::size_t requests = 0;
  std::size_t retries = 0;
};

/// Embeds `texts` in order. The output has exactly one row per input or the
/// call throws (ServiceError for transport, HTTP and response-shape failures;
/// ValidationError for bad configuration or a missing token). 429 and 5xx responses, and
/// connection failures, are retried with exponential backoff plus jitter.
std::vector<std::vector<double>> fetch_embeddings(const EmbedServiceConfig& config,
                                                  const std::vector<std::string>& texts,
                                                  EmbedStats* stats = nullptr);

/// Resolves a vector path such as "data[i].embedding" against a response
/// body for batch position `index`.
const nlohmann::json& resolve_vector_path(const nlohmann::json& body, const std::string& path,
                                          std::size_t index);

}  // namespace kcpd
