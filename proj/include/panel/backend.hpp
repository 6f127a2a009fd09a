#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace panel::backend {

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ChatRequest {
  std::string model_id;
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_output_tokens = 512;
  // Repeat number of the run that issued the request. Part of the cache key
  // so repeated runs are answered independently by a live endpoint.
  int replica = 1;
};

struct ChatResponse {
  std::string text;
  std::optional<Usage> usage;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
  int retries = 0;
};

struct CacheKey {
  std::string hex;

  static CacheKey of(const ChatRequest& request);
  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  virtual ChatResponse complete(const ChatRequest& request) = 0;
  // Stable description recorded in every run record.
  virtual std::string identity() const = 0;
  // Filled into ChatRequest::model_id by callers.
  virtual std::string model_id() const = 0;
};

// ---------------------------------------------------------------------------
// Mock

struct MockRule {
  std::string needle;  // substring searched in the system and user text
  std::string response;
};

struct MockScript {
  std::vector<MockRule> rules;
  std::optional<std::string> default_response;
};

/// Parses a rule file:
///
///   # comment
///   MATCH <substring> => <response-file>
///   DEFAULT => <response-file>
///
/// Response files are resolved relative to the rule file and read verbatim
/// (one trailing newline stripped).
MockScript load_mock_script(const std::filesystem::path& path);

/// Scripted backend: first matching rule wins, then the default response.
/// Never touches the network. Thread-safe.
class MockBackend final : public ChatBackend {
 public:
  explicit MockBackend(MockScript script);
  MockBackend(std::vector<MockRule> rules, std::optional<std::string> default_response);

  ChatResponse complete(const ChatRequest& request) override;
  std::string identity() const override;
  // Distinct per script so cached responses never leak between scripts.
  std::string model_id() const override { return "mock-" + digest_; }

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  MockScript script_;
  std::string digest_;
  std::atomic<std::size_t> calls_{0};
};

// ---------------------------------------------------------------------------
// HTTP

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_delay{1000};
  double factor = 2.0;
  std::chrono::milliseconds max_delay{60000};
};

struct HttpConfig {
  // Full URL of the chat-completion route, e.g.
  // https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string model_id;
  // Name of the environment variable holding the bearer token. The token
  // itself is never stored in config files.
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
  int max_in_flight = 4;
};

/// Client for endpoints speaking the messages-array chat-completion protocol.
/// Retries transport failures, 429 and 5xx with exponential backoff; 401/403
/// fail immediately with kAuth.
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string identity() const override;
  std::string model_id() const override { return config_.model_id; }

 private:
  HttpConfig config_;
  std::string base_url_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  std::counting_semaphore<> in_flight_;
};

// ---------------------------------------------------------------------------
// Cache

/// Content-addressed response store, one JSON file per key under a two-level
/// hex fan-out (`ab/cd/abcd....json`). Writes go to a temp file and are
/// renamed into place.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  void store(const CacheKey& key, const ChatRequest& request, const ChatResponse& response);

  // nullopt on miss. A damaged entry is removed and reported as
  // Error(kCacheCorrupt); the next load is a plain miss.
  std::optional<ChatResponse> load(const CacheKey& key);

  std::filesystem::path entry_path(const CacheKey& key) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
};

class CachingBackend final : public ChatBackend {
 public:
  CachingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ResponseCache> cache);

  ChatResponse complete(const ChatRequest& request) override;
  std::string identity() const override { return inner_->identity(); }
  std::string model_id() const override { return inner_->model_id(); }

  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }
  std::size_t corrupt_entries() const noexcept { return corrupt_.load(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<ResponseCache> cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
  std::atomic<std::size_t> corrupt_{0};
};

}  // namespace panel::backend
