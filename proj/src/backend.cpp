#include "panel/backend.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "panel/digest.hpp"
#include "panel/error.hpp"
#include "panel/text.hpp"

namespace panel::backend {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

CacheKey CacheKey::of(const ChatRequest& request) {
  FieldHasher h;
  h.add(request.model_id)
      .add(request.system)
      .add(request.user)
      .add(request.temperature)
      .add(static_cast<long long>(request.max_output_tokens));
  // Replica 1 hashes exactly like a request without repeats.
  if (request.replica != 1) h.add(static_cast<long long>(request.replica));
  return CacheKey{h.hex()};
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::string read_response_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read mock response " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::string script_digest(const MockScript& script) {
  FieldHasher h;
  for (const auto& rule : script.rules) h.add(rule.needle).add(rule.response);
  h.add(script.default_response ? "1" + *script.default_response : std::string("0"));
  return h.hex().substr(0, 12);
}

}  // namespace

MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read mock script " + path.string());
  const auto base = path.parent_path();
  MockScript script;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto arrow = body.rfind("=>");
    if (arrow == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  path.string() + ":" + std::to_string(line_no) + ": missing '=>'");
    }
    const auto head = text::trim(body.substr(0, arrow));
    const auto file = std::string(text::trim(body.substr(arrow + 2)));
    if (file.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  path.string() + ":" + std::to_string(line_no) + ": missing response file");
    }
    if (head == "DEFAULT") {
      script.default_response = read_response_file(base / file);
    } else if (head.rfind("MATCH ", 0) == 0) {
      const auto needle = std::string(text::trim(head.substr(6)));
      if (needle.empty()) {
        throw Error(ErrorCode::kInvalidConfig,
                    path.string() + ":" + std::to_string(line_no) + ": empty MATCH");
      }
      script.rules.push_back({needle, read_response_file(base / file)});
    } else {
      throw Error(ErrorCode::kInvalidConfig,
                  path.string() + ":" + std::to_string(line_no) + ": expected MATCH or DEFAULT");
    }
  }
  return script;
}

MockBackend::MockBackend(MockScript script)
    : script_(std::move(script)), digest_(script_digest(script_)) {}

MockBackend::MockBackend(std::vector<MockRule> rules, std::optional<std::string> default_response)
    : MockBackend(MockScript{std::move(rules), std::move(default_response)}) {}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  const auto start = Clock::now();
  calls_.fetch_add(1);
  ChatResponse response;
  bool matched = false;
  for (const auto& rule : script_.rules) {
    if (request.user.find(rule.needle) != std::string::npos ||
        request.system.find(rule.needle) != std::string::npos) {
      response.text = rule.response;
      matched = true;
      break;
    }
  }
  if (!matched) {
    if (!script_.default_response) {
      throw Error(ErrorCode::kNoRuleMatched, "no mock rule matched and no default is set");
    }
    response.text = *script_.default_response;
  }
  response.latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
  return response;
}

std::string MockBackend::identity() const { return "mock:" + digest_; }

// ---------------------------------------------------------------------------
// Cache

namespace {

std::string entry_checksum(const std::string& key, const std::string& text) {
  return FieldHasher().add(key).add(text).hex();
}

std::string temp_suffix() {
  static std::atomic<unsigned long long> counter{0};
  std::ostringstream ss;
  ss << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "."
     << counter.fetch_add(1);
  return ss.str();
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create cache dir " + root_.string());
}

std::filesystem::path ResponseCache::entry_path(const CacheKey& key) const {
  return root_ / key.hex.substr(0, 2) / key.hex.substr(2, 2) / (key.hex + ".json");
}

void ResponseCache::store(const CacheKey& key, const ChatRequest& request,
                          const ChatResponse& response) {
  json entry{{"format", 1},
             {"key", key.hex},
             {"model_id", request.model_id},
             {"temperature", request.temperature},
             {"max_output_tokens", request.max_output_tokens},
             {"replica", request.replica},
             {"system_sha256", sha256_hex(request.system)},
             {"user_sha256", sha256_hex(request.user)},
             {"text", response.text},
             {"checksum", entry_checksum(key.hex, response.text)}};
  if (response.usage) {
    entry["usage"] = {{"prompt_tokens", response.usage->prompt_tokens},
                      {"completion_tokens", response.usage->completion_tokens}};
  }
  const auto path = entry_path(key);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += temp_suffix();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write cache entry " + tmp.string());
    out << entry.dump();
    if (!out) throw Error(ErrorCode::kIo, "cannot write cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot commit cache entry " + path.string());
  }
}

std::optional<ChatResponse> ResponseCache::load(const CacheKey& key) {
  const auto path = entry_path(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  in.close();

  auto evict = [&](const std::string& why) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    return Error(ErrorCode::kCacheCorrupt, "cache entry " + path.string() + ": " + why);
  };

  json entry = json::parse(ss.str(), nullptr, /*allow_exceptions=*/false);
  if (entry.is_discarded() || !entry.is_object()) throw evict("not valid JSON");
  try {
    const auto stored_key = entry.at("key").get<std::string>();
    const auto text = entry.at("text").get<std::string>();
    if (stored_key != key.hex) throw evict("key mismatch");
    if (entry.at("checksum").get<std::string>() != entry_checksum(stored_key, text)) {
      throw evict("checksum mismatch");
    }
    ChatResponse response;
    response.text = text;
    response.from_cache = true;
    if (entry.contains("usage")) {
      response.usage = Usage{entry["usage"].value("prompt_tokens", 0),
                             entry["usage"].value("completion_tokens", 0)};
    }
    return response;
  } catch (const json::exception& e) {
    throw evict(e.what());
  }
}

CachingBackend::CachingBackend(std::shared_ptr<ChatBackend> inner,
                               std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

ChatResponse CachingBackend::complete(const ChatRequest& request) {
  const auto start = Clock::now();
  const auto key = CacheKey::of(request);
  try {
    if (auto hit = cache_->load(key)) {
      hits_.fetch_add(1);
      hit->latency = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
      return *hit;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kCacheCorrupt) throw;
    corrupt_.fetch_add(1);
  }
  misses_.fetch_add(1);
  auto response = inner_->complete(request);
  cache_->store(key, request, response);
  response.from_cache = false;
  return response;
}

}  // namespace panel::backend
