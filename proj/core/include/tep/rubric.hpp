#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/backend.hpp"
#include "tep/graph.hpp"

namespace tep {

inline constexpr std::array<std::string_view, 6> kIndependentDimensions{
    "structural_clarity",      "completeness",       "consistency", "context_integration",
    "reasoning_transparency", "format_compliance"};
inline constexpr std::array<std::string_view, 3> kDependentDimensions{
    "functional_correctness", "constraint_satisfaction", "quality_indicators"};
/// Weights of the task-independent dimensions, in hundredths.
inline constexpr std::array<int, 6> kIndependentWeightsPct{20, 20, 15, 15, 15, 15};

using IndependentRatings = std::array<int, 6>;
using DependentRatings = std::array<int, 3>;

struct RubricScores {
  IndependentRatings task_independent{};
  DependentRatings task_dependent{};
  std::string actionable_feedback;
  double overall_score = 0.0;                // recomputed from task_independent
  std::optional<double> reported_overall;    // what the critic claimed
  std::vector<std::string> clamped_fields;   // ratings that were out of range
};

/// Weighted task-independent quality in [0, 10]:
/// sum_i w_i * (r_i - 1) / 4 * 10. Throws Error(OutOfRangeRating).
double q_indep(std::span<const int, 6> ratings);

/// Extracts the JSON object from a critic response (code fences and
/// surrounding prose are tolerated). Out-of-range ratings are clamped to
/// [1, 5] with a warning. Throws Error(MalformedResponse).
RubricScores parse_critic_response(std::string_view text);

/// JSON document in the critic response schema.
std::string render_critic_response(const IndependentRatings& independent,
                                   const DependentRatings& dependent, std::string_view feedback);

/// A rating vector whose q_indep is closest to `score` (ties resolved by
/// lexicographic order).
IndependentRatings ratings_for_score(double score);

struct CriticRequestOptions {
  std::size_t parent_budget_tokens = 2048;
};

/// Local evaluation request for one node output. Parent context is the
/// parents' outputs in order; when it exceeds the budget its oldest tokens are
/// dropped behind a marker line. No other inputs are consulted.
CompletionRequest build_critic_request(const NodeOutput& output,
                                       std::span<const NodeOutput> parent_context,
                                       std::string_view task_schema,
                                       std::string_view critic_prompt,
                                       const CriticRequestOptions& options = {});

/// Population variance of the last `window` scores is below `epsilon`.
bool detect_equilibrium(std::span<const double> history, std::size_t window = 3,
                        double epsilon = 0.5);

struct KeywordConfig {
  std::vector<std::string> stylistic{"rename",  "formatting", "whitespace",  "style",
                                     "wording", "tone",       "readability", "comment"};
};

/// Whether the feedback asks for anything beyond stylistic changes. The text
/// is split into clauses; a clause is stylistic when it mentions a stylistic
/// keyword. Empty feedback is not substantive.
bool is_substantive(std::string_view feedback, const KeywordConfig& keywords = {});

inline constexpr double kSkipThreshold = 8.0;

bool should_skip_refinement(const RubricScores& initial, double threshold = kSkipThreshold);

enum class EquilibriumStatus { Converged, BudgetExhausted, NonSubstantive, EarlySkip };

std::string_view to_string(EquilibriumStatus status) noexcept;

struct EquilibriumState {
  std::vector<double> score_history;
  int iterations_used = 0;
  EquilibriumStatus status = EquilibriumStatus::BudgetExhausted;
};

}  // namespace tep
