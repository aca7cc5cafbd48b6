#include <cstdlib>

#include "doctest.h"
#include "kcpd/embed_client.hpp"
#include "kcpd/error.hpp"
#include "stub_server.hpp"

using namespace kcpd;

namespace {

EmbedServiceConfig stub_config(const testing::StubServer& server) {
  ::setenv("KCPD_TEST_TOKEN", "secret-token", 1);
  EmbedServiceConfig c;
  c.endpoint = server.endpoint();
  c.token_env = "KCPD_TEST_TOKEN";
  c.backoff_base_seconds = 0.001;
  c.timeout_seconds = 5.0;
  return c;
}

std::vector<std::string> texts(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("sentence number " + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("empty input makes no requests") {
  testing::StubServer server;
  EmbedStats stats;
  CHECK(fetch_embeddings(stub_config(server), {}, &stats).empty());
  CHECK(stats.requests == 0);
  CHECK(server.requests() == 0);
}

TEST_CASE("batches preserve order") {
  testing::StubServer server;
  const auto input = texts(250);
  for (std::size_t parallel : {1u, 3u}) {
    auto config = stub_config(server);
    config.parallel_connections = parallel;
    EmbedStats stats;
    const auto rows = fetch_embeddings(config, input, &stats);
    CHECK(stats.requests == 3);
    CHECK(stats.retries == 0);
    REQUIRE(rows.size() == 250);
    for (std::size_t i = 0; i < 250; ++i) CHECK(rows[i] == testing::stub_vector(input[i]));
  }
  CHECK(server.requests() == 6);
  CHECK(server.last_auth() == "Bearer secret-token");
}

TEST_CASE("429 twice then success") {
  testing::StubServer server(2);
  EmbedStats stats;
  const auto rows = fetch_embeddings(stub_config(server), texts(5), &stats);
  CHECK(rows.size() == 5);
  CHECK(stats.retries == 2);
  CHECK(stats.requests == 3);
}

TEST_CASE("5xx is retried too") {
  testing::StubServer server(1, 503);
  EmbedStats stats;
  CHECK(fetch_embeddings(stub_config(server), texts(2), &stats).size() == 2);
  CHECK(stats.retries == 1);
}

TEST_CASE("persistent 429 exhausts retries") {
  auto run = [](std::size_t max_retries) {
    testing::StubServer server(static_cast<int>(max_retries) + 1);
    auto config = stub_config(server);
    config.max_retries = max_retries;
    EmbedStats stats;
    CHECK_THROWS_AS(fetch_embeddings(config, texts(3), &stats), ServiceError);
    CHECK(stats.requests == max_retries + 1);
    CHECK(server.requests() == static_cast<int>(max_retries) + 1);
  };
  run(0);
  run(3);
}

TEST_CASE("client errors are not retried") {
  testing::StubServer server(1, 400);
  EmbedStats stats;
  CHECK_THROWS_AS(fetch_embeddings(stub_config(server), texts(3), &stats), ServiceError);
  CHECK(stats.requests == 1);
}

TEST_CASE("missing token") {
  testing::StubServer server;
  auto config = stub_config(server);
  config.token_env = "KCPD_TEST_TOKEN_DEFINITELY_UNSET";
  ::unsetenv("KCPD_TEST_TOKEN_DEFINITELY_UNSET");
  CHECK_THROWS_AS(fetch_embeddings(config, texts(1)), ValidationError);
  CHECK(server.requests() == 0);
}

TEST_CASE("connection failure is a service error") {
  EmbedServiceConfig c;
  ::setenv("KCPD_TEST_TOKEN", "x", 1);
  c.token_env = "KCPD_TEST_TOKEN";
  c.endpoint = "http://127.0.0.1:1/v1/embeddings";
  c.max_retries = 1;
  c.backoff_base_seconds = 0.001;
  c.timeout_seconds = 1.0;
  CHECK_THROWS_AS(fetch_embeddings(c, texts(1)), ServiceError);
}

TEST_CASE("config validation") {
  EmbedServiceConfig c;
  c.endpoint = "ftp://example.com";
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.endpoint = "http://example.com/v1";
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.batch_size = 1;
  c.vector_path = "data[x].embedding";
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("vector paths") {
  const auto body = nlohmann::json::parse(R"({"data":[{"embedding":[1,2]},{"embedding":[3]}],
                                              "out":{"vectors":[[9],[8]]}})");
  CHECK(resolve_vector_path(body, "data[i].embedding", 1) == nlohmann::json::array({3}));
  CHECK(resolve_vector_path(body, "out.vectors[i]", 0) == nlohmann::json::array({9}));
  CHECK(resolve_vector_path(body, "data[0].embedding", 1) == nlohmann::json::array({1, 2}));
  CHECK_THROWS_AS(resolve_vector_path(body, "nope[i]", 0), ValidationError);
}
