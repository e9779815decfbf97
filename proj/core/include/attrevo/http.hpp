#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrevo/completion.hpp"
#include "attrevo/embedding.hpp"

namespace attrevo {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;  // 0: the request never got a response
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const Headers& headers) = 0;
};

/// Real network transport over cpp-httplib. base_url like
/// "https://host:port" (an optional path prefix is kept).
class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, std::chrono::milliseconds timeout);
  HttpResponse post(const std::string& path, const std::string& body,
                    const Headers& headers) override;

 private:
  std::string origin_;
  std::string prefix_;
  std::chrono::milliseconds timeout_;
};

/// Replays recorded exchanges, in order, from a fixture file:
///   {"exchanges": [{"request": {"path": ...},
///                   "response": {"status": 200, "body": <json or string>}}]}
/// Running past the end, or a path mismatch, yields status 0.
class FixtureTransport final : public HttpTransport {
 public:
  explicit FixtureTransport(const std::filesystem::path& file);
  HttpResponse post(const std::string& path, const std::string& body,
                    const Headers& headers) override;

  [[nodiscard]] std::size_t calls() const;
  [[nodiscard]] std::vector<nlohmann::json> requests() const;
  [[nodiscard]] bool exhausted() const;

 private:
  mutable std::mutex mutex_;
  std::vector<nlohmann::json> exchanges_;
  std::vector<nlohmann::json> requests_;
  std::size_t next_ = 0;
};

/// Forwards to another transport and writes every exchange to a fixture file
/// readable by FixtureTransport.
class RecordingTransport final : public HttpTransport {
 public:
  RecordingTransport(HttpTransport& inner, std::filesystem::path file);
  HttpResponse post(const std::string& path, const std::string& body,
                    const Headers& headers) override;

 private:
  void flush() const;
  HttpTransport* inner_;
  std::filesystem::path file_;
  mutable std::mutex mutex_;
  nlohmann::json exchanges_ = nlohmann::json::array();
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep;  // empty: real sleep
};

using RequestLog = std::function<void(const nlohmann::json&)>;

struct HttpClientOptions {
  std::string model;
  std::string api_key;  // sent as a bearer token when non-empty
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  RequestLog log;
};

/// Caps concurrent requests per client.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t active_ = 0;
};

/// Shared POST-with-retry logic: transient failures (no response, 408, 429,
/// 5xx) back off exponentially; anything else fails at once.
class JsonApiClient {
 public:
  JsonApiClient(HttpTransport& transport, HttpClientOptions options);
  /// Throws Error{BackendUnavailable} or Error{MalformedResponse}.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body);
  [[nodiscard]] const HttpClientOptions& options() const noexcept { return options_; }

 private:
  HttpTransport* transport_;
  HttpClientOptions options_;
  InFlightLimiter limiter_;
};

/// Chat-completions endpoint: POST /v1/chat/completions.
class HttpCompletionClient final : public CompletionClient {
 public:
  HttpCompletionClient(HttpTransport& transport, HttpClientOptions options);
  std::string complete(const CompletionRequest& request) override;

  static nlohmann::json build_request(const std::string& model, const CompletionRequest& request);
  static std::string parse_response(const nlohmann::json& response);

 private:
  JsonApiClient api_;
};

/// Embeddings endpoint: POST /v1/embeddings. Returned vectors are
/// L2-normalized client-side.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(HttpTransport& transport, HttpClientOptions options,
                       std::size_t batch_size = 64);
  std::vector<Embedding> embed(std::span<const std::string> texts) override;

  static nlohmann::json build_request(const std::string& model, std::span<const std::string> texts);
  static std::vector<Embedding> parse_response(const nlohmann::json& response, std::size_t expected);

 private:
  JsonApiClient api_;
  std::size_t batch_size_;
};

inline constexpr const char* kChatCompletionsPath = "/v1/chat/completions";
inline constexpr const char* kEmbeddingsPath = "/v1/embeddings";

}  // namespace attrevo
