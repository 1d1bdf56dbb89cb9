#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/backend.hpp"
#include "tep/graph.hpp"
#include "tep/ledger.hpp"
#include "tep/random.hpp"
#include "tep/rubric.hpp"
#include "tep/textgrad.hpp"

namespace tep {

inline constexpr double kMinTemperature = 0.3;
inline constexpr double kMaxTemperature = 0.9;

struct TepConfig {
  double beta = 1.0;
  double beta_decay = 0.9;
  double epsilon = 0.01;
  int t_max = 40;
  int free_iteration_cap = 20;
  int nudged_iteration_cap = 40;
  std::size_t edit_budget_tokens = 64;
  std::size_t parent_budget_tokens = 2048;
  std::size_t equilibrium_window = 3;
  double equilibrium_epsilon = 0.5;
  double skip_threshold = kSkipThreshold;
  KeywordConfig keywords;
  unsigned max_threads = 0;
  bool cache_equilibria = true;
};

/// Draw from U(0.3, 0.9).
double sample_temperature(Rng& rng);

/// Cool after an accepted update, heat otherwise, clamped to [0.3, 0.9].
double adapt_temperature(double temperature, bool improved);

/// Everything a node's phases read: its composed input and the frozen parent
/// outputs from the iteration's initial execution.
struct NodeInput {
  std::string user_text;
  std::vector<NodeOutput> parents;
  std::string task_schema;
};

NodeInput node_input(const SCGraph& graph, std::size_t index, const TaskInstance& task,
                     const ExecutionTrace& execution);

struct PhaseResult {
  NodeOutput equilibrium_output;
  FeedbackSignal final_feedback;  // provenance is exactly the node
  EquilibriumState equilibrium;
  RubricScores last_scores;
};

/// Produce -> critique -> refine until the scores settle, the feedback turns
/// stylistic, or `free_iteration_cap` refinements were made. A high first
/// score skips refinement altogether.
PhaseResult free_phase(const NodeSpec& node, const NodeParams& params, const NodeInput& input,
                       Backend& backend, const TepConfig& config, std::uint64_t seed);

/// The same loop under the nudged actor prompt with the nudged cap. An empty
/// nudge reproduces the free phase under the same seed.
PhaseResult nudged_phase(const NodeSpec& node, const NodeParams& params, const NodeInput& input,
                         std::string_view nudge, Backend& backend, const TepConfig& config,
                         std::uint64_t seed);

/// Actor prompt with the nudge appended.
std::string nudged_prompt(std::string_view actor_prompt, std::string_view nudge);

/// Node-local objective: the task target, the node's role and its free-phase
/// equilibrium output. Nothing from other nodes' critics is included.
std::string forward_signal(const TaskInstance& task, const NodeSpec& node,
                           const NodeOutput& equilibrium_output);

struct Nudge {
  std::string text;
  std::size_t budget_tokens = 0;  // floor(edit_budget * beta)
  bool truncated = false;
};

/// Prompt edit toward the local objective, at most floor(edit_budget * beta)
/// tokens (longer edits are truncated with a warning; a zero budget yields an
/// empty edit without a backend call).
Nudge generate_nudge(std::string_view local_objective, double beta, std::size_t edit_budget_tokens,
                     Backend& backend, std::uint64_t seed = 0);

struct ValidationGate {
  std::function<double(const NodeParams&)> score_candidate;
  double incumbent_score = 0.0;
};

struct UpdateDecision {
  NodeParams params;  // what the node holds afterwards
  std::optional<NodeParams> candidate;
  bool accepted = false;
  bool malformed = false;
  double candidate_score = 0.0;
  double incumbent_score = 0.0;
};

/// U_v(g_free, g_nudged, theta_v) followed by the validation gate: the
/// candidate replaces the incumbent iff its score is at least the incumbent's.
/// Both signals must be strictly local to `node`.
UpdateDecision local_update(const NodeSpec& node, const FeedbackSignal& free_feedback,
                            const FeedbackSignal& nudged_feedback, const NodeParams& params,
                            Backend& backend, const ValidationGate& gate, std::uint64_t seed = 0);

/// Applies only the gate to an already proposed candidate.
UpdateDecision gate_candidate(const NodeParams& incumbent, std::optional<NodeParams> candidate,
                              const ValidationGate& gate);

struct TepResult {
  std::vector<NodeParams> params;
  std::vector<double> objective;  // J after each outer iteration
  std::vector<double> betas;      // beta used in each outer iteration
  double final_beta = 0.0;
  int iterations = 0;
};

/// The full outer loop. Phases and updates run concurrently across nodes; the
/// ledger is written in node order after each parallel step.
TepResult run_tep(const SCGraph& graph, std::span<const TaskInstance> train,
                  std::span<const TaskInstance> validation, BackendHandle backend,
                  const TepConfig& config, std::uint64_t seed, RunLedger& ledger);

}  // namespace tep
