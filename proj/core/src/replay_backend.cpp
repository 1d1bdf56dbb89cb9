#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "tep/backend.hpp"
#include "tep/error.hpp"

namespace tep {

using nlohmann::json;

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::BackendFailure, "SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace

std::string cache_key(const CompletionRequest& request) {
  // json objects keep keys sorted, which makes the dump canonical.
  json doc = {{"system_text", request.system_text},
              {"user_text", request.user_text},
              {"temperature", request.temperature},
              {"seed", request.seed}};
  return sha256_hex(doc.dump());
}

ReplayBackend::ReplayBackend(BackendHandle upstream, std::filesystem::path cache_dir, bool strict,
                             std::optional<std::size_t> context_limit)
    : Backend(context_limit.value_or(upstream ? upstream->context_limit() : kDefaultContextLimit)),
      upstream_(std::move(upstream)),
      dir_(std::move(cache_dir)),
      strict_(strict),
      decay_(upstream_ ? upstream_->specificity_decay() : std::nullopt) {
  if (!strict_ && !upstream_) {
    throw Error(ErrorCode::InvalidRequest, "non-strict replay needs an upstream backend");
  }
}

std::string ReplayBackend::describe() const {
  return fmt::format("replay({}{}, upstream {})", dir_.string(), strict_ ? ", strict" : "",
                     upstream_ ? upstream_->describe() : "none");
}

std::optional<double> ReplayBackend::specificity_decay() const noexcept { return decay_; }

std::filesystem::path ReplayBackend::entry_path(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::mutex& ReplayBackend::key_mutex(const std::string& key) {
  std::lock_guard lock(table_mutex_);
  auto& slot = key_mutexes_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::optional<Completion> ReplayBackend::load(const std::string& key) const {
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  json doc = json::parse(buf.str(), nullptr, false);
  if (doc.is_discarded() || !doc.contains("text") || !doc["text"].is_string()) {
    throw Error(ErrorCode::CacheMiss, fmt::format("corrupt cache entry {}", key));
  }
  Completion c;
  c.text = doc["text"].get<std::string>();
  if (doc.contains("reported_usage") && doc["reported_usage"].is_object()) {
    c.reported_usage = Usage{doc["reported_usage"].value("prompt_tokens", std::size_t{0}),
                             doc["reported_usage"].value("completion_tokens", std::size_t{0})};
  }
  return c;
}

void ReplayBackend::store(const std::string& key, const CompletionRequest& request,
                          const Completion& completion) {
  const auto path = entry_path(key);
  std::filesystem::create_directories(path.parent_path());
  json doc = {{"key", key},
              {"request",
               {{"system_text", request.system_text},
                {"user_text", request.user_text},
                {"temperature", request.temperature},
                {"seed", request.seed}}},
              {"text", completion.text}};
  if (completion.reported_usage) {
    doc["reported_usage"] = {{"prompt_tokens", completion.reported_usage->prompt_tokens},
                             {"completion_tokens", completion.reported_usage->completion_tokens}};
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write {}", tmp.string()));
    out << doc.dump(1);
  }
  std::filesystem::rename(tmp, path);
}

Completion ReplayBackend::do_complete(const CompletionRequest& request) {
  const std::string key = cache_key(request);
  std::lock_guard lock(key_mutex(key));
  if (auto hit = load(key)) {
    ++hits_;
    return *hit;
  }
  if (strict_) throw Error(ErrorCode::CacheMiss, fmt::format("no cached completion for {}", key));
  ++upstream_calls_;
  Completion live = upstream_->complete(request);
  store(key, request, live);
  return live;
}

}  // namespace tep
