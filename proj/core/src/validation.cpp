#include "tep/validation.hpp"

#include <charconv>

#include <fmt/format.h>

#include "tep/error.hpp"
#include "tep/random.hpp"
#include "tep/tasks.hpp"

namespace tep {

namespace {

std::string_view grader_of(const TaskInstance& task) {
  auto it = task.metadata.find(std::string(kGraderKey));
  return it == task.metadata.end() ? std::string_view("exact") : std::string_view(it->second);
}

std::optional<std::int64_t> truth_of(const TaskInstance& task) {
  auto it = task.metadata.find(std::string(kTruthKey));
  const std::string& s = it == task.metadata.end() ? task.target : it->second;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> tests_fraction(std::string_view out) {
  const auto pos = out.rfind("passed=");
  if (pos == std::string_view::npos) return std::nullopt;
  auto rest = out.substr(pos + 7);
  long long p = 0;
  long long q = 0;
  auto r1 = std::from_chars(rest.data(), rest.data() + rest.size(), p);
  if (r1.ec != std::errc{} || r1.ptr == rest.data() + rest.size() || *r1.ptr != '/') {
    return std::nullopt;
  }
  auto r2 = std::from_chars(r1.ptr + 1, rest.data() + rest.size(), q);
  if (r2.ec != std::errc{} || q <= 0 || p < 0) return std::nullopt;
  return std::min(1.0, static_cast<double>(p) / static_cast<double>(q));
}

bool graded_correct(const TaskInstance& task, std::string_view out) {
  return score_output(task, out) >= 1.0;
}

}  // namespace

double score_output(const TaskInstance& task, std::string_view sink_output) {
  if (grader_of(task) == "tests") return tests_fraction(sink_output).value_or(0.0);
  if (auto truth = truth_of(task)) return grade_exact(sink_output, *truth).correct ? 1.0 : 0.0;
  return sink_output.find(task.target) != std::string_view::npos ? 1.0 : 0.0;
}

std::string final_loss_text(const TaskInstance& task, std::string_view sink_output) {
  std::string produced;
  if (grader_of(task) == "tests") {
    const auto pos = sink_output.rfind("passed=");
    produced = pos == std::string_view::npos
                   ? "no test tally"
                   : std::string(sink_output.substr(pos, sink_output.find_first_of(" \n", pos) - pos));
  } else if (auto n = last_integer(sink_output)) {
    produced = std::to_string(*n);
  } else {
    produced = "no number";
  }
  return fmt::format("target: {}; produced: {}; graded: {}", task.target, produced,
                     graded_correct(task, sink_output) ? "correct" : "incorrect");
}

PipelineValidator::PipelineValidator(const SCGraph& graph, std::vector<TaskInstance> tasks,
                                     BackendHandle backend, std::uint64_t seed)
    : graph_(graph), tasks_(std::move(tasks)), backend_(std::move(backend)), seed_(seed) {
  if (tasks_.empty()) throw Error(ErrorCode::RangeError, "validation needs at least one task");
}

double PipelineValidator::score(std::span<const NodeParams> params) const {
  const auto sink = *graph_.index_of(graph_.sinks().front());
  double total = 0.0;
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    try {
      auto trace = execute(graph_, params, tasks_[i], *backend_, derive_seed(seed_, i));
      total += score_output(tasks_[i], trace.outputs[sink].text);
    } catch (const Error&) {
      // A failing execution counts as a wrong answer.
    }
  }
  return total / static_cast<double>(tasks_.size());
}

double PipelineValidator::score_with(std::span<const NodeParams> incumbent, std::size_t index,
                                     const NodeParams& candidate) const {
  std::vector<NodeParams> params(incumbent.begin(), incumbent.end());
  params.at(index) = candidate;
  return score(params);
}

}  // namespace tep
