#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tep {

inline constexpr std::size_t kDefaultContextLimit = 128000;

struct CompletionRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;  // [0, 1]
  int max_output_tokens = 1024;
  std::uint64_t seed = 0;
};

/// Throws Error(InvalidRequest) unless temperature is in [0, 1], user_text is
/// non-empty and max_output_tokens is positive.
void validate(const CompletionRequest& request);

/// Tokens counted against a backend's context window (system + user text).
std::size_t request_tokens(const CompletionRequest& request) noexcept;

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct Completion {
  std::string text;
  Usage usage;                         // whitespace-token counts
  std::optional<Usage> reported_usage;  // as reported by a remote model, if any
};

enum class BackendKind { Remote, Scripted, Replay };

std::string_view to_string(BackendKind kind) noexcept;

/// Language-model completion. `complete` validates the request and enforces
/// the context limit before any implementation sees it, so no backend ever
/// forwards an oversized request. Implementations must be safe to call
/// concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  Completion complete(const CompletionRequest& request);

  virtual BackendKind kind() const noexcept = 0;
  virtual std::string describe() const = 0;

  /// Per-summarisation specificity decay when this backend emulates a lossy
  /// feedback channel; empty for real models.
  virtual std::optional<double> specificity_decay() const noexcept { return std::nullopt; }

  std::size_t context_limit() const noexcept { return context_limit_; }
  std::uint64_t calls() const noexcept { return calls_.load(); }

 protected:
  explicit Backend(std::size_t context_limit);
  virtual Completion do_complete(const CompletionRequest& request) = 0;

 private:
  std::size_t context_limit_;
  std::atomic<std::uint64_t> calls_{0};
};

using BackendHandle = std::shared_ptr<Backend>;

// ---------------------------------------------------------------------------
// Scripted backend

/// Computes a response from the request and its seed. Must be pure.
using Responder = std::function<std::string(const CompletionRequest&)>;

enum class MatchField { System, User, Any };

struct ScriptRule {
  std::string name;
  std::string pattern;  // substring; empty matches everything
  MatchField field = MatchField::Any;
  Responder respond;
  std::size_t pad_tokens = 0;  // filler words appended to every response
};

/// Ordered rules, first match wins; `fallback` answers everything else, so the
/// script is total.
struct ScriptedBehavior {
  std::vector<ScriptRule> rules;
  ScriptRule fallback;
  double error_probability = 0.0;
  std::optional<double> specificity_decay;
};

namespace script {
Responder echo();
Responder fixed(std::string text);
Responder append(std::string suffix);
/// Uniform [0, 1) value derived from the request fields and seed.
double request_uniform(const CompletionRequest& request, std::string_view salt = {}) noexcept;
}  // namespace script

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(ScriptedBehavior behavior,
                           std::size_t context_limit = kDefaultContextLimit);

  BackendKind kind() const noexcept override { return BackendKind::Scripted; }
  std::string describe() const override;
  std::optional<double> specificity_decay() const noexcept override {
    return behavior_.specificity_decay;
  }

 protected:
  Completion do_complete(const CompletionRequest& request) override;

 private:
  ScriptedBehavior behavior_;
};

// ---------------------------------------------------------------------------
// Remote chat-completion backend

struct RemoteConfig {
  std::string url = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "TEP_API_KEY";
  std::size_t context_limit = kDefaultContextLimit;
  int timeout_seconds = 120;
  int max_retries = 2;
  int retry_backoff_ms = 250;
};

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);

  BackendKind kind() const noexcept override { return BackendKind::Remote; }
  std::string describe() const override;

  /// Request body sent for `request` (exposed for contract tests).
  std::string request_body(const CompletionRequest& request) const;

 protected:
  Completion do_complete(const CompletionRequest& request) override;

 private:
  RemoteConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Parses a chat-completion response body. Throws RemoteError on a body
/// without choices[0].message.content.
Completion parse_chat_completion(std::string_view body);

// ---------------------------------------------------------------------------
// Record / replay cache

/// SHA-256 (hex) over the canonical encoding of the request fields that
/// determine a completion: system_text, user_text, temperature, seed.
std::string cache_key(const CompletionRequest& request);

/// Content-addressed completion cache in front of an upstream backend.
/// In strict mode the upstream is never contacted and a missing key raises
/// Error(CacheMiss).
class ReplayBackend final : public Backend {
 public:
  ReplayBackend(BackendHandle upstream, std::filesystem::path cache_dir, bool strict,
                std::optional<std::size_t> context_limit = std::nullopt);

  BackendKind kind() const noexcept override { return BackendKind::Replay; }
  std::string describe() const override;
  std::optional<double> specificity_decay() const noexcept override;

  std::uint64_t upstream_calls() const noexcept { return upstream_calls_.load(); }
  std::uint64_t hits() const noexcept { return hits_.load(); }
  bool strict() const noexcept { return strict_; }
  std::filesystem::path entry_path(const std::string& key) const;

 protected:
  Completion do_complete(const CompletionRequest& request) override;

 private:
  std::optional<Completion> load(const std::string& key) const;
  void store(const std::string& key, const CompletionRequest& request,
             const Completion& completion);
  std::mutex& key_mutex(const std::string& key);

  BackendHandle upstream_;
  std::filesystem::path dir_;
  bool strict_;
  std::optional<double> decay_;
  std::atomic<std::uint64_t> upstream_calls_{0};
  std::atomic<std::uint64_t> hits_{0};
  std::mutex table_mutex_;
  std::unordered_map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

}  // namespace tep
