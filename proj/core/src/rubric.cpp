#include "tep/rubric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "tep/error.hpp"
#include "tep/metrics.hpp"
#include "tep/prompts.hpp"
#include "tep/text.hpp"

namespace tep {

using nlohmann::json;
using nlohmann::ordered_json;

double q_indep(std::span<const int, 6> ratings) {
  // Integer accumulation keeps the boundary values exact: the weights are in
  // hundredths, so the score is sum / 400 * 10.
  int sum = 0;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const int r = ratings[i];
    if (r < 1 || r > 5) {
      throw Error(ErrorCode::OutOfRangeRating,
                  fmt::format("{} = {} outside 1..5", kIndependentDimensions[i], r));
    }
    sum += kIndependentWeightsPct[i] * (r - 1);
  }
  return static_cast<double>(sum) / 40.0;
}

namespace {

int read_rating(const json& group, std::string_view group_name, std::string_view key,
                std::vector<std::string>& clamped) {
  const std::string k(key);
  if (!group.contains(k)) {
    throw Error(ErrorCode::MalformedResponse, fmt::format("missing {}.{}", group_name, key));
  }
  const json& v = group[k];
  double raw = 0.0;
  if (v.is_number()) {
    raw = v.get<double>();
  } else if (v.is_string()) {
    try {
      raw = std::stod(v.get<std::string>());
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedResponse, fmt::format("{}.{} is not a number", group_name, key));
    }
  } else {
    throw Error(ErrorCode::MalformedResponse, fmt::format("{}.{} is not a number", group_name, key));
  }
  if (!std::isfinite(raw)) {
    throw Error(ErrorCode::MalformedResponse, fmt::format("{}.{} is not finite", group_name, key));
  }
  const double rounded = std::round(raw);
  const int clamped_value = static_cast<int>(std::clamp(rounded, 1.0, 5.0));
  if (rounded != clamped_value || rounded != raw) {
    spdlog::warn("critic rating {}.{} = {} clamped to {}", group_name, key, raw, clamped_value);
    clamped.push_back(fmt::format("{}.{}", group_name, key));
  }
  return clamped_value;
}

}  // namespace

RubricScores parse_critic_response(std::string_view text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw Error(ErrorCode::MalformedResponse, "no JSON object in critic response");
  }
  json doc = json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::MalformedResponse, "critic response is not a JSON object");
  }
  for (const char* key : {"task_independent", "task_dependent"}) {
    if (!doc.contains(key) || !doc[key].is_object()) {
      throw Error(ErrorCode::MalformedResponse, fmt::format("missing object '{}'", key));
    }
  }
  if (!doc.contains("actionable_feedback") || !doc["actionable_feedback"].is_string()) {
    throw Error(ErrorCode::MalformedResponse, "missing string 'actionable_feedback'");
  }
  if (!doc.contains("overall_score") || !doc["overall_score"].is_number()) {
    throw Error(ErrorCode::MalformedResponse, "missing number 'overall_score'");
  }

  RubricScores s;
  for (std::size_t i = 0; i < kIndependentDimensions.size(); ++i) {
    s.task_independent[i] = read_rating(doc["task_independent"], "task_independent",
                                        kIndependentDimensions[i], s.clamped_fields);
  }
  for (std::size_t i = 0; i < kDependentDimensions.size(); ++i) {
    s.task_dependent[i] = read_rating(doc["task_dependent"], "task_dependent",
                                      kDependentDimensions[i], s.clamped_fields);
  }
  s.actionable_feedback = doc["actionable_feedback"].get<std::string>();
  s.reported_overall = doc["overall_score"].get<double>();
  s.overall_score = q_indep(s.task_independent);
  return s;
}

std::string render_critic_response(const IndependentRatings& independent,
                                   const DependentRatings& dependent, std::string_view feedback) {
  ordered_json doc;
  ordered_json ind = ordered_json::object();
  for (std::size_t i = 0; i < independent.size(); ++i) {
    ind[std::string(kIndependentDimensions[i])] = independent[i];
  }
  ordered_json dep = ordered_json::object();
  for (std::size_t i = 0; i < dependent.size(); ++i) {
    dep[std::string(kDependentDimensions[i])] = dependent[i];
  }
  doc["task_independent"] = std::move(ind);
  doc["task_dependent"] = std::move(dep);
  doc["actionable_feedback"] = std::string(feedback);
  doc["overall_score"] = q_indep(independent);
  return doc.dump(2);
}

IndependentRatings ratings_for_score(double score) {
  IndependentRatings best{1, 1, 1, 1, 1, 1};
  double best_gap = std::numeric_limits<double>::infinity();
  IndependentRatings r{1, 1, 1, 1, 1, 1};
  for (;;) {
    const double gap = std::abs(q_indep(r) - score);
    if (gap < best_gap) {
      best_gap = gap;
      best = r;
    }
    std::size_t i = r.size();
    while (i > 0 && r[i - 1] == 5) r[--i] = 1;
    if (i == 0) break;
    ++r[i - 1];
  }
  return best;
}

namespace {

std::string dimension_list(std::span<const std::string_view> names) {
  std::string out;
  for (auto n : names) out += fmt::format("- {} (1-5)\n", n);
  if (!out.empty()) out.pop_back();
  return out;
}

std::string schema_block() {
  ordered_json doc;
  ordered_json ind = ordered_json::object();
  for (auto k : kIndependentDimensions) ind[std::string(k)] = "<1-5>";
  ordered_json dep = ordered_json::object();
  for (auto k : kDependentDimensions) dep[std::string(k)] = "<1-5>";
  doc["task_independent"] = std::move(ind);
  doc["task_dependent"] = std::move(dep);
  doc["actionable_feedback"] = "<specific suggestions for improvement>";
  doc["overall_score"] = "<weighted average, 0-10>";
  return doc.dump(2);
}

// Keeps the last `budget` tokens of `text`.
std::string keep_tail(std::string_view text, std::size_t budget) {
  const std::size_t total = token_count(text);
  if (total <= budget) return std::string(text);
  std::string_view head = truncate_tokens(text, total - budget);
  std::string_view tail = text.substr(head.size());
  tail = text::trim(tail);
  return fmt::format("(parent context truncated: {} earlier tokens omitted)\n{}", total - budget,
                     tail);
}

}  // namespace

CompletionRequest build_critic_request(const NodeOutput& output,
                                       std::span<const NodeOutput> parent_context,
                                       std::string_view task_schema,
                                       std::string_view critic_prompt,
                                       const CriticRequestOptions& options) {
  if (output.text.empty()) throw Error(ErrorCode::InvalidRequest, "critic needs a node output");

  std::string parents;
  for (const auto& p : parent_context) {
    parents += fmt::format("<<{}>>\n{}\n", p.node_id, p.text);
  }
  if (parents.empty()) {
    parents = "(none)";
  } else {
    parents.pop_back();
    parents = keep_tail(parents, options.parent_budget_tokens);
  }

  CompletionRequest req;
  req.system_text = fmt::format("{}\n{}", prompts::kRubricCritic, prompts::kRubricCriticInstructions);
  if (!critic_prompt.empty()) req.system_text += fmt::format("\n\n{}", critic_prompt);
  req.user_text = text::section("Task-Independent Dimensions", dimension_list(kIndependentDimensions)) +
                  text::section("Task-Dependent Dimensions", dimension_list(kDependentDimensions)) +
                  text::section("Node Output", output.text) +
                  text::section("Parent Context", parents) +
                  text::section("Task Schema", task_schema.empty() ? "(none)" : task_schema) +
                  text::section("Required JSON Output", schema_block());
  req.temperature = 0.0;
  return req;
}

bool detect_equilibrium(std::span<const double> history, std::size_t window, double epsilon) {
  if (window == 0 || history.size() < window) return false;
  const auto last = history.last(window);
  double mean = 0.0;
  for (double x : last) mean += x;
  mean /= static_cast<double>(window);
  double var = 0.0;
  for (double x : last) var += (x - mean) * (x - mean);
  var /= static_cast<double>(window);
  return var < epsilon;
}

bool is_substantive(std::string_view feedback, const KeywordConfig& keywords) {
  const std::string lower = text::to_lower(feedback);
  std::vector<std::string_view> clauses;
  std::string_view rest = lower;
  while (!rest.empty()) {
    std::size_t cut = rest.find_first_of(";.,\n");
    std::size_t skip = 1;
    if (const auto conj = rest.find(" and "); conj < cut) {
      cut = conj;
      skip = 5;
    }
    if (cut == std::string_view::npos) {
      clauses.push_back(rest);
      break;
    }
    clauses.push_back(rest.substr(0, cut));
    rest.remove_prefix(cut + skip);
  }
  for (auto clause : clauses) {
    clause = text::trim(clause);
    if (clause.empty()) continue;
    const bool stylistic = std::any_of(keywords.stylistic.begin(), keywords.stylistic.end(),
                                       [&](const std::string& k) {
                                         return clause.find(text::to_lower(k)) != std::string_view::npos;
                                       });
    if (!stylistic) return true;
  }
  return false;
}

bool should_skip_refinement(const RubricScores& initial, double threshold) {
  return initial.overall_score >= threshold;
}

std::string_view to_string(EquilibriumStatus status) noexcept {
  switch (status) {
    case EquilibriumStatus::Converged: return "converged";
    case EquilibriumStatus::BudgetExhausted: return "budget_exhausted";
    case EquilibriumStatus::NonSubstantive: return "non_substantive";
    case EquilibriumStatus::EarlySkip: return "early_skip";
  }
  return "unknown";
}

}  // namespace tep
