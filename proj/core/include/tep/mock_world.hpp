#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "tep/backend.hpp"

// A deterministic stand-in for every model role in a pipeline run. Actor
// quality is a per-node level driven by the node's prompt: each "[fix]" line
// added by an accepted update raises it, each "[generic]" line lowers it.
// Outputs carry a running tally so sink grading reflects every node's level.
namespace tep {

struct WorldConfig {
  int checks_per_stage = 10;        // tests contributed per stage (code family)
  int initial_level = 5;            // passing checks before any edit
  std::size_t critic_pad_tokens = 50;
  double critic_elaboration = 0.2;  // share of downstream feedback restated per hop
  double actionability = 0.6;       // chance an update at full specificity is actionable
  std::optional<double> specificity_decay;
  double score_base = 5.0;          // rubric score of an unrevised output
  double score_step = 1.0;          // rubric gain per revision
  double stylistic_above = 9.0;     // feedback turns stylistic from this score on
  double error_probability = 0.0;
  std::size_t context_limit = kDefaultContextLimit;
};

struct Tally {
  long long passed = 0;
  long long total = 0;
  std::string key;
  std::optional<long long> answer;
};

/// The last "tally:" line in `text`.
std::optional<Tally> parse_tally(std::string_view text);

/// Actor quality level encoded by a system prompt.
int world_level(std::string_view system_text, const WorldConfig& config);

ScriptedBehavior make_world_behavior(const WorldConfig& config);
BackendHandle make_pipeline_world(const WorldConfig& config);

}  // namespace tep
