#include "httplib.h"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "rulechain/backend.hpp"

namespace rulechain::backend {

HttpConfig HttpConfig::from_env() {
  HttpConfig c;
  if (const char* key = std::getenv("OPENAI_API_KEY")) c.api_key = key;
  if (const char* url = std::getenv("OPENAI_BASE_URL")) c.base_url = url;
  return c;
}

HttpChatBackend::HttpChatBackend(HttpConfig config) : config_(std::move(config)) {
  if (config_.retry.max_attempts < 1) config_.retry.max_attempts = 1;
}

std::string HttpChatBackend::id() const { return "openai-chat:" + config_.base_url; }

nlohmann::json HttpChatBackend::request_body(const GenerationRequest& request) {
  nlohmann::json body;
  body["model"] = request.model_name;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
  return body;
}

Completion HttpChatBackend::parse_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendError::Kind::kMalformedResponse, std::string("invalid JSON: ") + e.what());
  }
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) {
      throw BackendError(BackendError::Kind::kMalformedResponse, "message content is not a string");
    }
    Completion c{content.get<std::string>(), std::nullopt};
    if (j.contains("usage") && j["usage"].is_object()) {
      c.usage = TokenUsage{j["usage"].value("prompt_tokens", std::int64_t{0}),
                           j["usage"].value("completion_tokens", std::int64_t{0})};
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendError::Kind::kMalformedResponse,
                       std::string("unexpected response shape: ") + e.what());
  }
}

Completion HttpChatBackend::generate(const GenerationRequest& request) {
  request.validate();
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const std::string payload = request_body(request).dump();

  auto backoff = config_.retry.initial_backoff;
  std::string last_error;
  bool rate_limited = false;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    auto res = client.Post(config_.endpoint_path, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      rate_limited = false;
    } else if (res->status == 401 || res->status == 403) {
      throw BackendError(BackendError::Kind::kAuthentication,
                         "HTTP " + std::to_string(res->status) + ": " + res->body);
    } else if (res->status == 429) {
      last_error = "HTTP 429: " + res->body;
      rate_limited = true;
    } else if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
      rate_limited = false;
    } else if (res->status != 200) {
      throw BackendError(BackendError::Kind::kTransport,
                         "HTTP " + std::to_string(res->status) + ": " + res->body);
    } else {
      return parse_response(res->body);
    }
    if (attempt < config_.retry.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(backoff * 2, config_.retry.max_backoff);
    }
  }
  throw BackendError(rate_limited ? BackendError::Kind::kRateLimitExhausted
                                  : BackendError::Kind::kTransport,
                     "giving up after " + std::to_string(config_.retry.max_attempts) +
                         " attempts: " + last_error);
}

}  // namespace rulechain::backend
