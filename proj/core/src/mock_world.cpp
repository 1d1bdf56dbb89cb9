#include "tep/mock_world.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "tep/metrics.hpp"
#include "tep/prompts.hpp"
#include "tep/random.hpp"
#include "tep/rubric.hpp"
#include "tep/tasks.hpp"
#include "tep/text.hpp"

namespace tep {

namespace {

template <typename T>
std::optional<T> number_after(std::string_view line, std::string_view key) {
  const auto pos = line.find(key);
  if (pos == std::string_view::npos) return std::nullopt;
  const char* begin = line.data() + pos + key.size();
  T v{};
  auto [ptr, ec] = std::from_chars(begin, line.data() + line.size(), v);
  if (ec != std::errc{}) return std::nullopt;
  return v;
}

std::string one_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::erase(out, '[');
  std::erase(out, ']');
  return out;
}

std::string render_tally(const Tally& t) {
  std::string line = fmt::format("tally: passed={}/{} key={}", t.passed, t.total, t.key);
  if (t.answer) line += fmt::format(" answer={}", *t.answer);
  return line;
}

std::string hex_key(std::string_view s) { return fmt::format("{:016x}", fnv1a64(s)); }

std::string actor(const CompletionRequest& r, const WorldConfig& cfg) {
  if (auto prev = text::find_section(r.user_text, sections::kPreviousOutput)) {
    const auto n = text::count_occurrences(*prev, "revision ");
    const auto cut = prev->rfind("tally:");
    const auto line = fmt::format("revision {}", n + 1);
    if (cut == std::string_view::npos) return fmt::format("{}\n{}", *prev, line);
    return fmt::format("{}{}\n{}", prev->substr(0, cut), line, prev->substr(cut));
  }

  const auto role = text::trim(text::first_line(r.system_text));
  const int level = world_level(r.system_text, cfg);
  const int checks = cfg.checks_per_stage;

  Tally t;
  if (auto task = text::find_section(r.user_text, sections::kTask)) {
    t.key = hex_key(*task);
    if (auto problem = parse_counting(*task)) t.answer = problem->truth;
  } else {
    bool first = true;
    std::string_view rest = r.user_text;
    for (auto pos = rest.find("tally:"); pos != std::string_view::npos;
         pos = rest.find("tally:", pos + 1)) {
      const auto end = rest.find('\n', pos);
      if (auto parent = parse_tally(rest.substr(pos, end == std::string_view::npos ? end : end - pos))) {
        t.passed += parent->passed;
        t.total += parent->total;
        if (first) {
          t.key = parent->key;
          t.answer = parent->answer;
          first = false;
        }
      }
    }
    if (first) t.key = hex_key(r.user_text);
  }

  if (t.answer) {
    const double u = to_unit(derive_seed(fnv1a64(role), fnv1a64(t.key)));
    const bool ok = u < static_cast<double>(level) / checks;
    t.passed += ok ? 1 : 0;
    t.total += 1;
    if (!ok) *t.answer += 1;
  } else {
    t.passed += level;
    t.total += checks;
  }

  std::string out = fmt::format("stage: {}\n", role.starts_with("Role:") ? text::trim(role.substr(5)) : role);
  if (r.system_text.find("Nudge:") != std::string::npos) out += "nudge: applied\n";
  out += render_tally(t);
  return out;
}

std::string rubric_critic(const CompletionRequest& r, const WorldConfig& cfg) {
  const auto output = text::find_section(r.user_text, sections::kNodeOutput).value_or("");
  const auto revisions = text::count_occurrences(output, "revision ");
  const double score = std::min(10.0, cfg.score_base + cfg.score_step * static_cast<double>(revisions));
  const auto independent = ratings_for_score(score);
  const int dep = std::clamp(static_cast<int>(std::lround(score / 2.0)), 1, 5);
  const std::string_view feedback = score >= cfg.stylistic_above
                                        ? "adjust whitespace formatting for readability"
                                        : "replace >= with > in the loop condition";
  return render_critic_response(independent, {dep, dep, dep}, feedback);
}

std::string gradient_critic(const CompletionRequest& r, const WorldConfig& cfg) {
  auto downstream = text::find_section(r.user_text, sections::kDownstreamFeedback);
  if (!downstream) downstream = text::find_section(r.user_text, sections::kLoss);
  const std::string_view incoming = downstream.value_or("");
  const auto role = text::find_section(r.user_text, sections::kNodeRole).value_or("this stage");
  const auto restate_n = static_cast<std::size_t>(
      std::floor(cfg.critic_elaboration * static_cast<double>(token_count(incoming))));

  std::string out;
  if (!incoming.empty()) out += fmt::format("{}\n", incoming);
  if (restate_n > 0) {
    out += fmt::format("Restated for {}: {}\n", role, one_line(truncate_tokens(incoming, restate_n)));
  }
  out += fmt::format("Finding for {}: the output should move the final answer toward the target.\n",
                     one_line(role));
  out += text::pad_words(cfg.critic_pad_tokens);
  return out;
}

std::string summarizer(const CompletionRequest& r) {
  const auto limit_text = text::find_section(r.user_text, sections::kWordLimit).value_or("100");
  std::size_t limit = 100;
  std::from_chars(limit_text.data(), limit_text.data() + limit_text.size(), limit);
  const auto feedback = text::find_section(r.user_text, sections::kFeedback).value_or("");
  return fmt::format("Summary: {}", one_line(truncate_tokens(feedback, limit > 0 ? limit - 1 : 0)));
}

std::string update_operator(const CompletionRequest& r, const WorldConfig& cfg) {
  const auto current = text::find_section(r.user_text, sections::kCurrentPrompt).value_or("");
  double specificity = 1.0;
  if (auto s = text::find_section(r.user_text, sections::kFeedbackSpecificity)) {
    const auto body = text::trim(*s);
    std::from_chars(body.data(), body.data() + body.size(), specificity);
  }
  auto feedback = text::find_section(r.user_text, sections::kFeedback);
  if (!feedback) feedback = text::find_section(r.user_text, sections::kFreeFeedback);
  const double u = script::request_uniform(r, "actionable");
  std::string edit;
  if (u < cfg.actionability * specificity) {
    edit = fmt::format("[fix] {}", one_line(truncate_tokens(feedback.value_or(""), 12)));
  } else {
    edit = "[generic] improve overall quality";
  }
  return fmt::format("<prompt>\n{}\n{}\n</prompt>", current, edit);
}

std::string nudge_generator(const CompletionRequest& r) {
  const auto target = text::find_section(r.user_text, sections::kTaskTarget).value_or("the target");
  return fmt::format(
      "Check every intermediate value against the expected result {} and state the final answer "
      "explicitly; keep the node focused on its own step and reject unsupported assumptions "
      "before answering.",
      one_line(target));
}

ScriptRule system_rule(std::string name, std::string_view marker, Responder fn) {
  ScriptRule rule;
  rule.name = std::move(name);
  rule.pattern = std::string(marker);
  rule.field = MatchField::System;
  rule.respond = std::move(fn);
  return rule;
}

}  // namespace

std::optional<Tally> parse_tally(std::string_view text) {
  const auto pos = text.rfind("tally:");
  if (pos == std::string_view::npos) return std::nullopt;
  auto line = text.substr(pos);
  line = line.substr(0, line.find('\n'));
  Tally t;
  auto passed = number_after<long long>(line, "passed=");
  if (!passed) return std::nullopt;
  t.passed = *passed;
  auto slash = line.find('/', line.find("passed="));
  if (slash == std::string_view::npos) return std::nullopt;
  auto total = number_after<long long>(line.substr(slash), "/");
  if (!total) return std::nullopt;
  t.total = *total;
  if (auto k = line.find("key="); k != std::string_view::npos) {
    auto rest = line.substr(k + 4);
    t.key = std::string(rest.substr(0, rest.find(' ')));
  }
  t.answer = number_after<long long>(line, "answer=");
  return t;
}

int world_level(std::string_view system_text, const WorldConfig& config) {
  const auto fixes = static_cast<int>(text::count_occurrences(system_text, "[fix]"));
  const auto generics = static_cast<int>(text::count_occurrences(system_text, "[generic]"));
  return std::clamp(config.initial_level + fixes - generics, 0, config.checks_per_stage);
}

ScriptedBehavior make_world_behavior(const WorldConfig& config) {
  ScriptedBehavior b;
  b.rules.push_back(system_rule("rubric-critic", prompts::kRubricCritic,
                                [config](const CompletionRequest& r) { return rubric_critic(r, config); }));
  b.rules.push_back(system_rule("gradient-critic", prompts::kGradientCritic,
                                [config](const CompletionRequest& r) { return gradient_critic(r, config); }));
  b.rules.push_back(system_rule("summarizer", prompts::kSummarizer, summarizer));
  b.rules.push_back(system_rule("update-operator", prompts::kUpdateOperator,
                                [config](const CompletionRequest& r) { return update_operator(r, config); }));
  b.rules.push_back(system_rule("nudge-generator", prompts::kNudgeGenerator, nudge_generator));
  b.fallback.name = "actor";
  b.fallback.respond = [config](const CompletionRequest& r) { return actor(r, config); };
  b.error_probability = config.error_probability;
  b.specificity_decay = config.specificity_decay;
  return b;
}

BackendHandle make_pipeline_world(const WorldConfig& config) {
  return std::make_shared<ScriptedBackend>(make_world_behavior(config), config.context_limit);
}

}  // namespace tep
