#pragma once

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "tep/backend.hpp"
#include "tep/text.hpp"

namespace tep::fixtures {

/// Body of the first labelled section of a request.
inline std::string first_section_body(std::string_view user_text) {
  const auto nl = user_text.find('\n');
  if (nl == std::string_view::npos) return std::string(user_text);
  std::string body(user_text.substr(nl + 1));
  const auto next = body.find("\n[");
  if (next != std::string::npos) body.resize(next);
  while (!body.empty() && body.back() == '\n') body.pop_back();
  return body;
}

/// Returns its input unchanged.
inline BackendHandle identity_backend(std::size_t limit = kDefaultContextLimit) {
  ScriptedBehavior b;
  b.fallback.respond = [](const CompletionRequest& r) { return first_section_body(r.user_text); };
  return std::make_shared<ScriptedBackend>(b, limit);
}

/// Appends "|<system text>" to its input.
inline BackendHandle append_id_backend() {
  ScriptedBehavior b;
  b.fallback.respond = [](const CompletionRequest& r) {
    return first_section_body(r.user_text) + "|" + r.system_text;
  };
  return std::make_shared<ScriptedBackend>(b);
}

/// Minimal OpenAI-compatible chat-completion server on 127.0.0.1 that answers
/// with a wrapped backend. Failure statuses can be queued to exercise retries.
class ChatServer {
 public:
  explicit ChatServer(BackendHandle responder) : responder_(std::move(responder)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      {
        std::lock_guard lock(mutex_);
        last_body_ = req.body;
        last_auth_ = req.get_header_value("Authorization");
        if (!failures_.empty()) {
          res.status = failures_.front();
          failures_.pop_front();
          res.set_content(R"({"error":"injected"})", "application/json");
          return;
        }
      }
      auto body = nlohmann::json::parse(req.body);
      CompletionRequest r;
      for (const auto& m : body["messages"]) {
        if (m["role"] == "system") r.system_text = m["content"];
        if (m["role"] == "user") r.user_text = m["content"];
      }
      r.temperature = body.value("temperature", 0.0);
      r.max_output_tokens = body.value("max_tokens", 1024);
      r.seed = body.value("seed", std::uint64_t{0});
      auto c = responder_->complete(r);
      nlohmann::json out = {
          {"id", "chatcmpl-test"},
          {"object", "chat.completion"},
          {"choices",
           {{{"index", 0},
             {"message", {{"role", "assistant"}, {"content", c.text}}},
             {"finish_reason", "stop"}}}},
          {"usage",
           {{"prompt_tokens", c.usage.prompt_tokens + 3},
            {"completion_tokens", c.usage.completion_tokens + 1}}}};
      res.set_content(out.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ChatServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  ChatServer(const ChatServer&) = delete;
  ChatServer& operator=(const ChatServer&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int requests() const { return requests_.load(); }
  void fail_next(int status) {
    std::lock_guard lock(mutex_);
    failures_.push_back(status);
  }
  std::string last_body() const {
    std::lock_guard lock(mutex_);
    return last_body_;
  }
  std::string last_auth() const {
    std::lock_guard lock(mutex_);
    return last_auth_;
  }

 private:
  BackendHandle responder_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> requests_{0};
  mutable std::mutex mutex_;
  std::deque<int> failures_;
  std::string last_body_;
  std::string last_auth_;
};

}  // namespace tep::fixtures
