#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/backend.hpp"
#include "tep/graph.hpp"
#include "tep/ledger.hpp"

namespace tep {

struct FeedbackSignal {
  std::string text;
  std::size_t token_count = 0;
  std::set<std::string> provenance;
  std::optional<double> specificity;  // only under channels with a known decay
  int hop_distance = 0;
  bool summarized = false;
};

FeedbackSignal make_signal(std::string text, std::set<std::string> provenance,
                           std::optional<double> specificity, int hop_distance);

/// Specificity of a fresh, uncompressed critique: 1 on channels that model a
/// decay, unknown otherwise.
std::optional<double> initial_specificity(const Backend& backend);

/// Critique of one node given its output and the aggregated feedback of its
/// descendants (`downstream`), or the loss message for a sink. The result's
/// provenance is downstream's plus the node; its hop distance is one more.
/// Throws ContextOverflowError (with the node id) when the embedded feedback
/// no longer fits the backend context.
FeedbackSignal critique_node(const NodeSpec& node, const NodeParams& params,
                             const NodeOutput& output, const FeedbackSignal* downstream,
                             std::string_view loss_text, Backend& backend, std::uint64_t seed = 0);

/// Compresses `g` to at most `cap_tokens` tokens. Signals already within the
/// cap are returned unchanged. Specificity is multiplied by the backend's
/// decay; summaries that ignore the cap are truncated.
FeedbackSignal summarize_feedback(const FeedbackSignal& g, std::size_t cap_tokens, Backend& backend,
                                  std::uint64_t seed = 0);

/// Text between <prompt> and </prompt>. Throws Error(MalformedUpdate).
std::string extract_prompt(std::string_view operator_output);

/// Rewrites the node's actor prompt from one feedback signal.
NodeParams propose_update(const NodeSpec& node, const NodeParams& params,
                          const FeedbackSignal& feedback, Backend& backend, std::uint64_t seed = 0);

struct BackpropResult {
  /// g_v: each node's own critique (empty when it overflowed or was starved).
  std::vector<std::optional<FeedbackSignal>> local;
  /// What each node passed to its parents (g_v, or its summary).
  std::vector<std::optional<FeedbackSignal>> transmitted;
  /// U_v(g_v, theta_v), when the update operator produced a usable prompt.
  std::vector<std::optional<NodeParams>> candidates;
  std::vector<bool> attempted;
};

struct BackpropOptions {
  std::optional<std::size_t> summary_cap;
  int iteration = 0;
  std::uint64_t seed = 0;
  unsigned max_threads = 0;
};

/// Reverse-topological feedback sweep from the sinks followed by one update
/// proposal per node that received feedback. Overflowing nodes keep their
/// parameters; every transmitted signal and overflow is logged.
BackpropResult backprop_update(const SCGraph& graph, std::span<const NodeParams> params,
                               const ExecutionTrace& execution, std::string_view final_loss,
                               Backend& backend, const BackpropOptions& options,
                               RunLedger* ledger = nullptr);

struct TextGradConfig {
  int iterations = 10;
  std::optional<std::size_t> summary_cap;
  unsigned max_threads = 0;
};

struct OptimizationResult {
  std::vector<NodeParams> params;
  std::vector<double> objective;  // J after each iteration
};

/// Global textual backpropagation with validation-gated updates. `ledger`
/// receives every signal, overflow and update decision.
OptimizationResult run_textgrad(const SCGraph& graph, std::span<const TaskInstance> train,
                                std::span<const TaskInstance> validation, BackendHandle backend,
                                const TextGradConfig& config, std::uint64_t seed,
                                RunLedger& ledger);

}  // namespace tep
