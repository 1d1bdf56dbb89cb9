#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tep/backend.hpp"
#include "tep/graph.hpp"

namespace tep {

/// Task score in [0, 1] for a sink output. "exact" tasks score 1 when the last
/// integer equals the truth; "tests" tasks score the fraction in the last
/// "passed=P/Q" tally.
double score_output(const TaskInstance& task, std::string_view sink_output);

/// Loss message handed to the sink critic:
/// "target: <t>; produced: <p>; graded: <correct|incorrect>".
std::string final_loss_text(const TaskInstance& task, std::string_view sink_output);

/// Scores parameter sets by executing the graph on a fixed validation batch.
/// Each task uses the same execution seed for every candidate, so candidate
/// and incumbent are compared under common random numbers.
class PipelineValidator {
 public:
  PipelineValidator(const SCGraph& graph, std::vector<TaskInstance> tasks, BackendHandle backend,
                    std::uint64_t seed);

  /// Mean task score; a task whose execution fails scores 0.
  double score(std::span<const NodeParams> params) const;
  /// Score with node `index` switched to `candidate`.
  double score_with(std::span<const NodeParams> incumbent, std::size_t index,
                    const NodeParams& candidate) const;

  std::size_t size() const noexcept { return tasks_.size(); }

 private:
  const SCGraph& graph_;
  std::vector<TaskInstance> tasks_;
  BackendHandle backend_;
  std::uint64_t seed_;
};

}  // namespace tep
