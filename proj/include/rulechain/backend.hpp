#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace rulechain::backend {

struct GenerationRequest {
  std::string prompt;
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::vector<std::string> stop_sequences;

  /// Throws std::invalid_argument for an empty prompt, negative temperature
  /// or non-positive max_tokens.
  void validate() const;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct Completion {
  std::string text;
  std::optional<TokenUsage> usage;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind {
    kTransport,
    kAuthentication,
    kRateLimitExhausted,
    kMalformedResponse,
    kUnregisteredPrompt,
    kReplayMiss,
  };

  BackendError(Kind kind, const std::string& what);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(BackendError::Kind kind);

class Backend {
 public:
  virtual ~Backend() = default;
  /// Stable identifier that goes into cache keys.
  virtual std::string id() const = 0;
  virtual Completion generate(const GenerationRequest& request) = 0;
};

/// Answers from a fixed prompt -> response table. Thread-safe.
class ScriptedBackend : public Backend {
 public:
  using Fallback = std::function<std::optional<std::string>(const GenerationRequest&)>;

  explicit ScriptedBackend(std::string id = "scripted") : id_(std::move(id)) {}

  void add(std::string prompt, std::string response);
  /// Registers a response by the SHA-256 hex digest of the prompt.
  void add_by_digest(std::string prompt_sha256, std::string response);
  /// Consulted when neither table matches.
  void set_fallback(Fallback fallback);

  /// Reads {"responses": [{"prompt"|"prompt_sha256": ..., "response": ...}],
  /// "default": ...}; "default" is optional and answers any other prompt.
  static std::unique_ptr<ScriptedBackend> from_json(const nlohmann::json& j,
                                                    std::string id = "scripted");

  std::string id() const override { return id_; }
  Completion generate(const GenerationRequest& request) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string id_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> by_prompt_;
  std::map<std::string, std::string> by_digest_;
  Fallback fallback_;
  std::atomic<std::size_t> calls_{0};
};

/// Always fails; stands in for the network in replay mode.
class OfflineBackend : public Backend {
 public:
  std::string id() const override { return id_; }
  explicit OfflineBackend(std::string id) : id_(std::move(id)) {}
  Completion generate(const GenerationRequest& request) override;

 private:
  std::string id_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{16000};
};

struct HttpConfig {
  /// Scheme, host and optional port, e.g. "https://api.openai.com".
  std::string base_url = "https://api.openai.com";
  std::string endpoint_path = "/v1/chat/completions";
  std::string api_key;
  RetryPolicy retry;
  std::chrono::seconds timeout{120};

  /// Reads OPENAI_API_KEY and OPENAI_BASE_URL when set.
  static HttpConfig from_env();
};

/// OpenAI-compatible chat completions; the prompt is sent as a single user
/// message. Retries transport errors, 429 and 5xx with exponential backoff.
class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(HttpConfig config);

  std::string id() const override;
  Completion generate(const GenerationRequest& request) override;

  static nlohmann::json request_body(const GenerationRequest& request);
  /// Extracts choices[0].message.content and usage; throws kMalformedResponse.
  static Completion parse_response(const std::string& body);

 private:
  HttpConfig config_;
};

std::string sha256_hex(std::string_view data);

enum class CacheMode {
  kReadWrite,  // serve hits, call the backend on a miss and store the result
  kReplay,     // serve hits only; a miss is a kReplayMiss error
};

struct CacheEntry {
  std::string key;
  nlohmann::json request;
  std::string response;
  std::string timestamp;
  std::optional<TokenUsage> usage;
};

struct CachedResult {
  std::string text;
  bool hit = false;
};

/// Content-addressed response store: one <key>.json file per request under
/// the cache directory. Writes go to a temporary file that is then renamed.
class ResponseCache {
 public:
  using WarningSink = std::function<void(const std::string&)>;

  ResponseCache(Backend& backend, std::filesystem::path dir, CacheMode mode = CacheMode::kReadWrite);

  /// Canonical serialization of the fields that determine a response.
  nlohmann::json canonical_request(const GenerationRequest& request) const;
  std::string key(const GenerationRequest& request) const;

  CachedResult cached_generate(const GenerationRequest& request);

  std::optional<CacheEntry> lookup(const std::string& key) const;

  void set_warning_sink(WarningSink sink) { warn_ = std::move(sink); }
  std::size_t backend_calls() const { return backend_calls_.load(); }
  std::size_t hits() const { return hits_.load(); }
  CacheMode mode() const { return mode_; }

 private:
  void store(const CacheEntry& entry);
  void warn(const std::string& message) const;

  Backend& backend_;
  std::filesystem::path dir_;
  CacheMode mode_;
  WarningSink warn_;
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::uint64_t> tmp_counter_{0};
};

}  // namespace rulechain::backend
