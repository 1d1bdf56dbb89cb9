#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tep {

inline constexpr int kTraceSchemaVersion = 1;

/// One transmitted feedback message (global backprop) or one phase's final
/// local feedback (TEP).
struct SignalRecord {
  int iteration = 0;
  std::string node_id;
  int hop_distance = 0;
  std::size_t token_count = 0;
  std::size_t provenance_size = 0;
  std::optional<double> specificity;
  bool summarized = false;
};

struct OverflowRecord {
  int iteration = 0;
  std::string node_id;
  std::string stage;  // "execute", "critique", "summarize", "update", ...
  std::size_t requested_tokens = 0;
  std::size_t limit_tokens = 0;
};

struct PhaseRecord {
  int iteration = 0;
  std::string node_id;
  std::string phase;   // "free" | "nudged"
  std::string status;  // converged | budget_exhausted | non_substantive | early_skip
  int iterations_used = 0;
  std::vector<double> scores;
  std::size_t feedback_tokens = 0;
  std::size_t provenance_size = 0;
  bool cached = false;
};

struct NudgeRecord {
  int iteration = 0;
  std::string node_id;
  double beta = 0.0;
  std::size_t budget_tokens = 0;
  std::size_t edit_tokens = 0;
  std::size_t objective_tokens = 0;
  bool truncated = false;
};

struct UpdateRecord {
  int iteration = 0;
  std::string node_id;
  bool accepted = false;
  double candidate_score = 0.0;
  double incumbent_score = 0.0;
  double temperature = 0.0;
};

struct FailureRecord {
  int iteration = 0;
  std::string node_id;
  std::string stage;
  std::string error;
};

struct IterationRecord {
  int iteration = 0;
  std::size_t task_index = 0;
  std::uint64_t seed = 0;
  double objective = 0.0;  // J estimate (mean validation loss)
  std::optional<double> beta;
  std::vector<std::pair<std::string, double>> temperatures;
};

/// Append-only record of an optimisation run. Appends are serialised; when a
/// line sink is attached every record is also emitted as one JSON line at the
/// moment it is appended.
class RunLedger {
 public:
  using LineSink = std::function<void(const std::string&)>;

  RunLedger() = default;
  RunLedger(const RunLedger& other);
  RunLedger& operator=(const RunLedger& other);

  /// Fields stamped on every emitted line.
  void set_context(std::string method, std::string family, int scale_or_depth, std::uint64_t seed);
  void set_sink(LineSink sink);

  void record(SignalRecord r);
  void record(OverflowRecord r);
  void record(PhaseRecord r);
  void record(NudgeRecord r);
  void record(UpdateRecord r);
  void record(FailureRecord r);
  void record(IterationRecord r);
  /// Free-form event, e.g. run start / end markers.
  void note(const std::string& event, const std::string& detail);

  const std::vector<SignalRecord>& signals() const { return signals_; }
  const std::vector<OverflowRecord>& overflows() const { return overflows_; }
  const std::vector<PhaseRecord>& phases() const { return phases_; }
  const std::vector<NudgeRecord>& nudges() const { return nudges_; }
  const std::vector<UpdateRecord>& updates() const { return updates_; }
  const std::vector<FailureRecord>& failures() const { return failures_; }
  const std::vector<IterationRecord>& iterations() const { return iterations_; }

  std::size_t attempted_updates() const { return updates_.size(); }
  std::size_t accepted_updates() const;

  /// Every record appended so far, one JSON object per line, in append order.
  std::string to_jsonl() const;

 private:
  void emit(std::string line);

  mutable std::mutex mutex_;
  std::string method_;
  std::string family_;
  int scale_or_depth_ = 0;
  std::uint64_t seed_ = 0;
  LineSink sink_;
  std::vector<std::string> lines_;
  std::vector<SignalRecord> signals_;
  std::vector<OverflowRecord> overflows_;
  std::vector<PhaseRecord> phases_;
  std::vector<NudgeRecord> nudges_;
  std::vector<UpdateRecord> updates_;
  std::vector<FailureRecord> failures_;
  std::vector<IterationRecord> iterations_;
};

/// Line-buffered append-only file; each write is flushed so an interrupted run
/// leaves only complete lines behind.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path, bool append = false);
  void write(const std::string& line);
  RunLedger::LineSink sink();

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace tep
