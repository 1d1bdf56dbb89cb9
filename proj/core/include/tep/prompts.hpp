#pragma once

#include <string_view>

// Fixed role texts for the auxiliary model calls the optimisers make. Each
// opens the system text of its request, so scripted backends (and humans
// reading a trace) can tell the calls apart.
namespace tep::prompts {

inline constexpr std::string_view kRubricCritic =
    "You are a local quality assessor for a compound AI system node.";

inline constexpr std::string_view kRubricCriticInstructions =
    "Evaluate only the node output below against the rubric, using the parent context and the "
    "task schema. Rate every dimension on a 1-5 scale. Respond with exactly one JSON object "
    "matching the required schema and nothing else.";

inline constexpr std::string_view kGradientCritic =
    "You are the feedback critic of a compound AI system. Explain how the node's output and "
    "prompt should change to reduce the downstream loss.";

inline constexpr std::string_view kSummarizer =
    "You compress optimisation feedback. Keep the most actionable points and stay within the "
    "stated word limit.";

inline constexpr std::string_view kUpdateOperator =
    "You are the prompt update operator of a compound AI system. Rewrite the node's actor "
    "prompt so that it addresses the feedback. Return the complete new prompt between <prompt> "
    "and </prompt> tags.";

inline constexpr std::string_view kNudgeGenerator =
    "You propose minimal prompt edits. Given a node's local objective, write one short "
    "instruction to add to the node's prompt that moves its output toward the task target.";

inline constexpr std::string_view kRefineInstruction =
    "Revise your previous output to address the critic's feedback. Return the full revised "
    "output.";

}  // namespace tep::prompts

// Section names shared by the request builders and anything that reads the
// requests back (scripted worlds, trace tooling).
namespace tep::sections {

inline constexpr std::string_view kTask = "Task";
inline constexpr std::string_view kPreviousOutput = "Previous Output";
inline constexpr std::string_view kCriticFeedback = "Critic Feedback";
inline constexpr std::string_view kInstruction = "Instruction";

inline constexpr std::string_view kNodeRole = "Node Role";
inline constexpr std::string_view kNodePrompt = "Node Prompt";
inline constexpr std::string_view kNodeOutput = "Node Output";
inline constexpr std::string_view kDownstreamFeedback = "Downstream Feedback";
inline constexpr std::string_view kLoss = "Loss";

inline constexpr std::string_view kFeedback = "Feedback";
inline constexpr std::string_view kWordLimit = "Word Limit";

inline constexpr std::string_view kCurrentPrompt = "Current Prompt";
inline constexpr std::string_view kFreeFeedback = "Free Feedback";
inline constexpr std::string_view kNudgedFeedback = "Nudged Feedback";
inline constexpr std::string_view kFeedbackSpecificity = "Feedback Specificity";

inline constexpr std::string_view kTaskTarget = "Task Target";
inline constexpr std::string_view kEquilibriumOutput = "Equilibrium Output";
inline constexpr std::string_view kEditBudget = "Edit Budget";

}  // namespace tep::sections
