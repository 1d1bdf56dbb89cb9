#include <chrono>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"
#include "tep/backend.hpp"
#include "tep/error.hpp"

namespace tep {

using nlohmann::json;

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidRequest, fmt::format("URL '{}' has no scheme", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

RemoteBackend::RemoteBackend(RemoteConfig config)
    : Backend(config.context_limit), config_(std::move(config)) {
  std::tie(scheme_host_port_, path_) = split_url(config_.url);
}

std::string RemoteBackend::describe() const {
  return fmt::format("remote({} at {}, limit {})", config_.model, config_.url, context_limit());
}

std::string RemoteBackend::request_body(const CompletionRequest& request) const {
  json messages = json::array();
  if (!request.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", request.system_text}});
  }
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  json body = {{"model", config_.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_output_tokens},
               {"seed", request.seed}};
  return body.dump();
}

Completion parse_chat_completion(std::string_view body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw RemoteError(200, "response body is not JSON");
  const json* content = nullptr;
  if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
    const json& choice = doc["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      content = &choice["message"]["content"];
    }
  }
  if (!content) throw RemoteError(200, "response lacks choices[0].message.content");
  Completion c;
  c.text = content->get<std::string>();
  if (doc.contains("usage") && doc["usage"].is_object()) {
    const json& u = doc["usage"];
    Usage reported;
    reported.prompt_tokens = u.value("prompt_tokens", std::size_t{0});
    reported.completion_tokens = u.value("completion_tokens", std::size_t{0});
    c.reported_usage = reported;
  }
  return c;
}

Completion RemoteBackend::do_complete(const CompletionRequest& request) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", fmt::format("Bearer {}", key));
  }
  const std::string body = request_body(request);

  for (int attempt = 0;; ++attempt) {
    auto res = client.Post(path_, headers, body, "application/json");
    const bool last = attempt >= config_.max_retries;
    if (!res) {
      if (last) {
        throw RemoteError(0, fmt::format("transport error: {}", httplib::to_string(res.error())));
      }
      spdlog::warn("remote backend transport error ({}), retrying",
                   httplib::to_string(res.error()));
    } else if (res->status >= 200 && res->status < 300) {
      return parse_chat_completion(res->body);
    } else if (last || !retryable(res->status)) {
      throw RemoteError(res->status, res->body.substr(0, 512));
    } else {
      spdlog::warn("remote backend returned {}, retrying", res->status);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry_backoff_ms << attempt));
  }
}

}  // namespace tep
