#include "attrevo/http.hpp"

#include <fstream>
#include <thread>

#include <httplib.h>

#include "attrevo/error.hpp"

namespace attrevo {

using nlohmann::json;

HttplibTransport::HttplibTransport(std::string base_url, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  const auto scheme = base_url.find("://");
  const auto path_start = base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    origin_ = std::move(base_url);
  } else {
    origin_ = base_url.substr(0, path_start);
    prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
}

HttpResponse HttplibTransport::post(const std::string& path, const std::string& body,
                                    const Headers& headers) {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(prefix_ + path, h, body, "application/json");
  if (!res) return {0, httplib::to_string(res.error())};
  return {res->status, res->body};
}

FixtureTransport::FixtureTransport(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::Io, "cannot open fixture " + file.string());
  try {
    exchanges_ = json::parse(in).at("exchanges").get<std::vector<json>>();
  } catch (const json::exception& e) {
    throw Error(Errc::Io, "bad fixture " + file.string() + ": " + e.what());
  }
}

HttpResponse FixtureTransport::post(const std::string& path, const std::string& body,
                                    const Headers& /*headers*/) {
  std::lock_guard lock(mutex_);
  json request{{"path", path}};
  try {
    request["body"] = json::parse(body);
  } catch (const json::exception&) {
    request["body"] = body;
  }
  requests_.push_back(request);
  if (next_ >= exchanges_.size()) return {0, "fixture exhausted"};
  const json& ex = exchanges_[next_++];
  if (ex.at("request").value("path", path) != path) return {0, "fixture path mismatch"};
  const json& resp = ex.at("response");
  const json& b = resp.at("body");
  return {resp.value("status", 200), b.is_string() ? b.get<std::string>() : b.dump()};
}

std::size_t FixtureTransport::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<json> FixtureTransport::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

bool FixtureTransport::exhausted() const {
  std::lock_guard lock(mutex_);
  return next_ >= exchanges_.size();
}

RecordingTransport::RecordingTransport(HttpTransport& inner, std::filesystem::path file)
    : inner_(&inner), file_(std::move(file)) {}

HttpResponse RecordingTransport::post(const std::string& path, const std::string& body,
                                      const Headers& headers) {
  HttpResponse r = inner_->post(path, body, headers);
  std::lock_guard lock(mutex_);
  json resp_body;
  try {
    resp_body = json::parse(r.body);
  } catch (const json::exception&) {
    resp_body = r.body;
  }
  exchanges_.push_back({{"request", {{"path", path}}},
                        {"response", {{"status", r.status}, {"body", resp_body}}}});
  flush();
  return r;
}

void RecordingTransport::flush() const {
  std::ofstream out(file_, std::ios::trunc);
  out << json{{"exchanges", exchanges_}}.dump(2) << '\n';
}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return active_ < limit_; });
  ++active_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mutex_);
    --active_;
  }
  cv_.notify_one();
}

namespace {

bool is_transient(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

struct SlotGuard {
  InFlightLimiter& limiter;
  explicit SlotGuard(InFlightLimiter& l) : limiter(l) { limiter.acquire(); }
  ~SlotGuard() { limiter.release(); }
};

}  // namespace

JsonApiClient::JsonApiClient(HttpTransport& transport, HttpClientOptions options)
    : transport_(&transport), options_(std::move(options)), limiter_(options_.max_in_flight) {
  if (options_.retry.attempts < 1) throw Error(Errc::InvalidConfig, "retry attempts must be >= 1");
}

json JsonApiClient::post_json(const std::string& path, const json& body) {
  Headers headers{{"Accept", "application/json"}};
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);
  const std::string payload = body.dump();

  auto backoff = options_.retry.initial_backoff;
  HttpResponse last;
  for (int attempt = 1; attempt <= options_.retry.attempts; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    {
      SlotGuard slot(limiter_);
      last = transport_->post(path, payload, headers);
    }
    const auto latency = std::chrono::duration<double, std::milli>(
        std::chrono::steady_clock::now() - t0);
    if (options_.log) {
      options_.log(json{{"path", path},
                        {"attempt", attempt},
                        {"status", last.status},
                        {"latency_ms", latency.count()},
                        {"request", body},
                        {"response", last.body}});
    }
    if (last.status >= 200 && last.status < 300) {
      try {
        return json::parse(last.body);
      } catch (const json::exception& e) {
        throw Error(Errc::MalformedResponse, path + ": response is not JSON: " + e.what());
      }
    }
    if (!is_transient(last.status)) {
      throw Error(Errc::BackendUnavailable,
                  path + ": HTTP " + std::to_string(last.status) + ": " + last.body);
    }
    if (attempt < options_.retry.attempts) {
      if (options_.retry.sleep) {
        options_.retry.sleep(backoff);
      } else {
        std::this_thread::sleep_for(backoff);
      }
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * options_.retry.multiplier));
    }
  }
  throw Error(Errc::BackendUnavailable,
              path + ": giving up after " + std::to_string(options_.retry.attempts) +
                  " attempts (last status " + std::to_string(last.status) + ")");
}

HttpCompletionClient::HttpCompletionClient(HttpTransport& transport, HttpClientOptions options)
    : api_(transport, std::move(options)) {}

json HttpCompletionClient::build_request(const std::string& model, const CompletionRequest& request) {
  return json{{"model", model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"seed", request.seed}};
}

std::string HttpCompletionClient::parse_response(const json& response) {
  try {
    const json& choices = response.at("choices");
    if (!choices.is_array() || choices.empty()) {
      throw Error(Errc::MalformedResponse, "completion response has no choices");
    }
    const json& content = choices.at(0).at("message").at("content");
    if (!content.is_string()) throw Error(Errc::MalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("completion response: ") + e.what());
  }
}

std::string HttpCompletionClient::complete(const CompletionRequest& request) {
  return parse_response(api_.post_json(kChatCompletionsPath, build_request(api_.options().model, request)));
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpTransport& transport, HttpClientOptions options,
                                           std::size_t batch_size)
    : api_(transport, std::move(options)), batch_size_(batch_size == 0 ? 1 : batch_size) {}

json HttpEmbeddingBackend::build_request(const std::string& model, std::span<const std::string> texts) {
  return json{{"model", model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
}

std::vector<Embedding> HttpEmbeddingBackend::parse_response(const json& response, std::size_t expected) {
  std::vector<Embedding> out(expected);
  std::vector<bool> seen(expected, false);
  try {
    const json& data = response.at("data");
    if (!data.is_array() || data.size() != expected) {
      throw Error(Errc::MalformedResponse, "embedding response holds the wrong number of vectors");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const json& item = data[i];
      const std::size_t idx = item.contains("index") ? item.at("index").get<std::size_t>() : i;
      if (idx >= expected || seen[idx]) throw Error(Errc::MalformedResponse, "bad embedding index");
      seen[idx] = true;
      out[idx] = item.at("embedding").get<Embedding>();
      if (out[idx].empty()) throw Error(Errc::MalformedResponse, "empty embedding");
      l2_normalize(out[idx]);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("embedding response: ") + e.what());
  }
  const std::size_t dim = out.empty() ? 0 : out.front().size();
  for (const Embedding& e : out) {
    if (e.size() != dim) throw Error(Errc::MalformedResponse, "embedding dims disagree");
  }
  return out;
}

std::vector<Embedding> HttpEmbeddingBackend::embed(std::span<const std::string> texts) {
  std::vector<Embedding> all;
  all.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
    const auto batch = texts.subspan(start, std::min(batch_size_, texts.size() - start));
    auto part = parse_response(api_.post_json(kEmbeddingsPath, build_request(api_.options().model, batch)),
                               batch.size());
    for (auto& e : part) all.push_back(std::move(e));
  }
  return all;
}

}  // namespace attrevo
