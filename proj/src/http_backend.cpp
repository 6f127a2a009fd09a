#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include "json.hpp"
#include "panel/backend.hpp"
#include "panel/error.hpp"

namespace panel::backend {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "endpoint needs a scheme: " + endpoint);
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base = endpoint;
    path = "/";
  } else {
    base = endpoint.substr(0, path_start);
    path = endpoint.substr(path_start);
  }
}

json request_body(const ChatRequest& request) {
  json messages = json::array();
  if (!request.system.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user}});
  return {{"model", request.model_id},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_output_tokens}};
}

ChatResponse parse_body(const std::string& body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::kMalformedResponse, "response is not JSON");
  }
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) {
      throw Error(ErrorCode::kMalformedResponse, "first choice has no text content");
    }
    ChatResponse response;
    response.text = content.get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
      response.usage = Usage{doc["usage"].value("prompt_tokens", 0),
                             doc["usage"].value("completion_tokens", 0)};
    }
    return response;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("unexpected response shape: ") + e.what());
  }
}

}  // namespace

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
  split_endpoint(config_.endpoint, base_url_, path_);
  if (config_.model_id.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "model_id is required for an HTTP backend");
  }
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
  if (config_.retry.max_attempts < 1) config_.retry.max_attempts = 1;
}

std::string HttpBackend::identity() const {
  return "http:" + config_.endpoint + "#" + config_.model_id;
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  const auto start = Clock::now();
  const std::string body = request_body(request).dump();

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto delay = config_.retry.initial_delay;
  ErrorCode last_code = ErrorCode::kTransport;
  std::string last_detail;

  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    httplib::Result result;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<>& sem;
        ~Release() { sem.release(); }
      } release{in_flight_};

      httplib::Client client(base_url_);
      client.set_connection_timeout(config_.timeout);
      client.set_read_timeout(config_.timeout);
      client.set_write_timeout(config_.timeout);
      result = client.Post(path_, headers, body, "application/json");
    }

    if (!result) {
      last_code = ErrorCode::kTransport;
      last_detail = "transport failure: " + httplib::to_string(result.error());
    } else {
      const int status = result->status;
      if (status >= 200 && status < 300) {
        auto response = parse_body(result->body);
        response.retries = attempt - 1;
        response.latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
        return response;
      }
      if (status == 401 || status == 403) {
        throw Error(ErrorCode::kAuth, "endpoint rejected credentials (HTTP " +
                                          std::to_string(status) + ")");
      }
      if (status == 429) {
        last_code = ErrorCode::kRateLimited;
        last_detail = "rate limited (HTTP 429)";
      } else if (status >= 500) {
        last_code = ErrorCode::kTransport;
        last_detail = "server error (HTTP " + std::to_string(status) + ")";
      } else {
        throw Error(ErrorCode::kTransport, "request rejected (HTTP " + std::to_string(status) +
                                               "): " + result->body.substr(0, 200));
      }
    }

    if (attempt < config_.retry.max_attempts) {
      std::this_thread::sleep_for(delay);
      const auto next = std::chrono::duration<double, std::milli>(delay) * config_.retry.factor;
      delay = std::min(std::chrono::duration_cast<std::chrono::milliseconds>(next),
                       config_.retry.max_delay);
    }
  }
  throw Error(last_code, last_detail + " after " + std::to_string(config_.retry.max_attempts) +
                             " attempts");
}

}  // namespace panel::backend
