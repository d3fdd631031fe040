#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "rulechain/backend.hpp"

namespace rulechain::backend {

void GenerationRequest::validate() const {
  if (prompt.empty()) throw std::invalid_argument("generation request has an empty prompt");
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
}

BackendError::BackendError(Kind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

std::string_view to_string(BackendError::Kind kind) {
  switch (kind) {
    case BackendError::Kind::kTransport:
      return "transport_error";
    case BackendError::Kind::kAuthentication:
      return "authentication_error";
    case BackendError::Kind::kRateLimitExhausted:
      return "rate_limit_exhausted";
    case BackendError::Kind::kMalformedResponse:
      return "malformed_response";
    case BackendError::Kind::kUnregisteredPrompt:
      return "unregistered_prompt";
    case BackendError::Kind::kReplayMiss:
      return "replay_miss";
  }
  return "unknown";
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

// ---------------------------------------------------------------------------

void ScriptedBackend::add(std::string prompt, std::string response) {
  std::lock_guard lock(mu_);
  by_prompt_[std::move(prompt)] = std::move(response);
}

void ScriptedBackend::add_by_digest(std::string prompt_sha256, std::string response) {
  std::lock_guard lock(mu_);
  by_digest_[std::move(prompt_sha256)] = std::move(response);
}

void ScriptedBackend::set_fallback(Fallback fallback) {
  std::lock_guard lock(mu_);
  fallback_ = std::move(fallback);
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& j,
                                                            std::string id) {
  auto backend = std::make_unique<ScriptedBackend>(std::move(id));
  for (const auto& item : j.value("responses", nlohmann::json::array())) {
    std::string response = item.at("response").get<std::string>();
    if (item.contains("prompt")) {
      backend->add(item.at("prompt").get<std::string>(), std::move(response));
    } else {
      backend->add_by_digest(item.at("prompt_sha256").get<std::string>(), std::move(response));
    }
  }
  if (j.contains("default")) {
    std::string fallback = j.at("default").get<std::string>();
    backend->set_fallback([fallback](const GenerationRequest&) { return fallback; });
  }
  return backend;
}

Completion ScriptedBackend::generate(const GenerationRequest& request) {
  request.validate();
  calls_.fetch_add(1);
  Fallback fallback;
  {
    std::lock_guard lock(mu_);
    if (auto it = by_prompt_.find(request.prompt); it != by_prompt_.end()) {
      return {it->second, std::nullopt};
    }
    if (!by_digest_.empty()) {
      if (auto it = by_digest_.find(sha256_hex(request.prompt)); it != by_digest_.end()) {
        return {it->second, std::nullopt};
      }
    }
    fallback = fallback_;
  }
  if (fallback) {
    if (auto text = fallback(request)) return {std::move(*text), std::nullopt};
  }
  throw BackendError(BackendError::Kind::kUnregisteredPrompt,
                     "no scripted response for prompt " + sha256_hex(request.prompt));
}

Completion OfflineBackend::generate(const GenerationRequest& request) {
  throw BackendError(BackendError::Kind::kReplayMiss,
                     "offline backend cannot serve prompt " + sha256_hex(request.prompt));
}

// ---------------------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(Backend& backend, std::filesystem::path dir, CacheMode mode)
    : backend_(backend), dir_(std::move(dir)), mode_(mode) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec && mode_ == CacheMode::kReadWrite) {
    warn("cannot create cache directory " + dir_.string() + ": " + ec.message());
  }
}

nlohmann::json ResponseCache::canonical_request(const GenerationRequest& request) const {
  nlohmann::json j;
  j["backend"] = backend_.id();
  j["model"] = request.model_name;
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_tokens;
  j["prompt"] = request.prompt;
  if (!request.stop_sequences.empty()) j["stop"] = request.stop_sequences;
  return j;
}

std::string ResponseCache::key(const GenerationRequest& request) const {
  return sha256_hex(canonical_request(request).dump());
}

std::optional<CacheEntry> ResponseCache::lookup(const std::string& key) const {
  const auto path = dir_ / (key + ".json");
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    CacheEntry e;
    e.key = j.at("key").get<std::string>();
    e.request = j.at("request");
    e.response = j.at("response").get<std::string>();
    e.timestamp = j.value("timestamp", "");
    if (j.contains("token_usage") && !j["token_usage"].is_null()) {
      e.usage = TokenUsage{j["token_usage"].at("prompt_tokens").get<std::int64_t>(),
                           j["token_usage"].at("completion_tokens").get<std::int64_t>()};
    }
    if (e.key != key) {
      warn("cache entry " + path.string() + " carries a different key; ignoring");
      return std::nullopt;
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    warn("unreadable cache entry " + path.string() + ": " + ex.what());
    return std::nullopt;
  }
}

void ResponseCache::store(const CacheEntry& entry) {
  nlohmann::json j;
  j["key"] = entry.key;
  j["request"] = entry.request;
  j["response"] = entry.response;
  j["timestamp"] = entry.timestamp;
  j["token_usage"] = entry.usage ? nlohmann::json{{"prompt_tokens", entry.usage->prompt_tokens},
                                                  {"completion_tokens", entry.usage->completion_tokens}}
                                 : nlohmann::json();
  const auto final_path = dir_ / (entry.key + ".json");
  const auto tmp_path = dir_ / (entry.key + ".json.tmp." + std::to_string(::getpid()) + "." +
                                std::to_string(tmp_counter_.fetch_add(1)));
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) {
      warn("cannot write cache entry " + tmp_path.string() + "; continuing without caching");
      std::error_code ec;
      std::filesystem::remove(tmp_path, ec);
      return;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) {
    warn("cannot publish cache entry " + final_path.string() + ": " + ec.message());
    std::filesystem::remove(tmp_path, ec);
  }
}

CachedResult ResponseCache::cached_generate(const GenerationRequest& request) {
  request.validate();
  const std::string k = key(request);
  if (auto entry = lookup(k)) {
    hits_.fetch_add(1);
    return {std::move(entry->response), true};
  }
  if (mode_ == CacheMode::kReplay) {
    throw BackendError(BackendError::Kind::kReplayMiss, "no cached response for key " + k);
  }
  backend_calls_.fetch_add(1);
  Completion c = backend_.generate(request);
  store({k, canonical_request(request), c.text, utc_timestamp(), c.usage});
  return {std::move(c.text), false};
}

void ResponseCache::warn(const std::string& message) const {
  if (warn_) {
    warn_(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace rulechain::backend
