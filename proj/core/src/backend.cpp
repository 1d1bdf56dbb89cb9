#include <fmt/format.h>

#include "tep/backend.hpp"
#include "tep/error.hpp"
#include "tep/metrics.hpp"

namespace tep {

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::Remote: return "remote";
    case BackendKind::Scripted: return "scripted";
    case BackendKind::Replay: return "replay";
  }
  return "unknown";
}

void validate(const CompletionRequest& request) {
  if (!(request.temperature >= 0.0 && request.temperature <= 1.0)) {
    throw Error(ErrorCode::InvalidRequest,
                fmt::format("temperature {} outside [0, 1]", request.temperature));
  }
  if (request.user_text.empty()) throw Error(ErrorCode::InvalidRequest, "empty user text");
  if (request.max_output_tokens <= 0) {
    throw Error(ErrorCode::InvalidRequest, "max_output_tokens must be positive");
  }
}

std::size_t request_tokens(const CompletionRequest& request) noexcept {
  return token_count(request.system_text) + token_count(request.user_text);
}

Backend::Backend(std::size_t context_limit) : context_limit_(context_limit) {
  if (context_limit == 0) throw Error(ErrorCode::InvalidRequest, "context limit must be positive");
}

Completion Backend::complete(const CompletionRequest& request) {
  validate(request);
  const std::size_t tokens = request_tokens(request);
  if (tokens > context_limit_) throw ContextOverflowError(tokens, context_limit_);
  ++calls_;
  Completion c = do_complete(request);
  c.usage.prompt_tokens = tokens;
  c.usage.completion_tokens = token_count(c.text);
  return c;
}

}  // namespace tep
