#include <bit>

#include <fmt/format.h>

#include "tep/backend.hpp"
#include "tep/error.hpp"
#include "tep/random.hpp"
#include "tep/text.hpp"

namespace tep {

namespace script {

Responder echo() {
  return [](const CompletionRequest& r) { return r.user_text; };
}

Responder fixed(std::string text) {
  return [text = std::move(text)](const CompletionRequest&) { return text; };
}

Responder append(std::string suffix) {
  return [suffix = std::move(suffix)](const CompletionRequest& r) { return r.user_text + suffix; };
}

double request_uniform(const CompletionRequest& request, std::string_view salt) noexcept {
  std::uint64_t h = fnv1a64(request.system_text);
  h = fnv1a64(request.user_text, h ^ 0x5bd1e995ULL);
  h = fnv1a64(salt, h);
  return to_unit(derive_seed(h, std::bit_cast<std::uint64_t>(request.temperature), request.seed));
}

}  // namespace script

namespace {

bool matches(const ScriptRule& rule, const CompletionRequest& r) {
  if (rule.pattern.empty()) return true;
  switch (rule.field) {
    case MatchField::System: return r.system_text.find(rule.pattern) != std::string::npos;
    case MatchField::User: return r.user_text.find(rule.pattern) != std::string::npos;
    case MatchField::Any:
      return r.system_text.find(rule.pattern) != std::string::npos ||
             r.user_text.find(rule.pattern) != std::string::npos;
  }
  return false;
}

}  // namespace

ScriptedBackend::ScriptedBackend(ScriptedBehavior behavior, std::size_t context_limit)
    : Backend(context_limit), behavior_(std::move(behavior)) {
  if (!behavior_.fallback.respond) behavior_.fallback.respond = script::echo();
  for (const auto& rule : behavior_.rules) {
    if (!rule.respond) {
      throw Error(ErrorCode::InvalidRequest, fmt::format("rule '{}' has no responder", rule.name));
    }
  }
}

std::string ScriptedBackend::describe() const {
  return fmt::format("scripted({} rules, limit {})", behavior_.rules.size(), context_limit());
}

Completion ScriptedBackend::do_complete(const CompletionRequest& request) {
  if (behavior_.error_probability > 0.0 &&
      script::request_uniform(request, "error-injection") < behavior_.error_probability) {
    throw Error(ErrorCode::BackendFailure, "injected scripted failure");
  }
  const ScriptRule* rule = &behavior_.fallback;
  for (const auto& r : behavior_.rules) {
    if (matches(r, request)) {
      rule = &r;
      break;
    }
  }
  Completion c;
  c.text = rule->respond(request);
  if (rule->pad_tokens > 0) {
    if (!c.text.empty()) c.text += ' ';
    c.text += text::pad_words(rule->pad_tokens);
  }
  return c;
}

}  // namespace tep
