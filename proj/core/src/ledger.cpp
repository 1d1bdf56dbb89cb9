#include "tep/ledger.hpp"

#include <algorithm>

#include "json.hpp"
#include "tep/error.hpp"

namespace tep {

using nlohmann::ordered_json;

namespace {

ordered_json base(const char* event, const std::string& method, const std::string& family,
                  int scale, std::uint64_t seed) {
  ordered_json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["event"] = event;
  j["method"] = method;
  j["family"] = family;
  j["scale_or_depth"] = scale;
  j["run_seed"] = seed;
  return j;
}

}  // namespace

RunLedger::RunLedger(const RunLedger& other) { *this = other; }

RunLedger& RunLedger::operator=(const RunLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  method_ = other.method_;
  family_ = other.family_;
  scale_or_depth_ = other.scale_or_depth_;
  seed_ = other.seed_;
  sink_ = other.sink_;
  lines_ = other.lines_;
  signals_ = other.signals_;
  overflows_ = other.overflows_;
  phases_ = other.phases_;
  nudges_ = other.nudges_;
  updates_ = other.updates_;
  failures_ = other.failures_;
  iterations_ = other.iterations_;
  return *this;
}

void RunLedger::set_context(std::string method, std::string family, int scale_or_depth,
                            std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  method_ = std::move(method);
  family_ = std::move(family);
  scale_or_depth_ = scale_or_depth;
  seed_ = seed;
}

void RunLedger::set_sink(LineSink sink) {
  std::lock_guard lock(mutex_);
  sink_ = std::move(sink);
}

// Callers hold mutex_.
void RunLedger::emit(std::string line) {
  if (sink_) sink_(line);
  lines_.push_back(std::move(line));
}

void RunLedger::record(SignalRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("signal", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["node_id"] = r.node_id;
  j["hop_distance"] = r.hop_distance;
  j["token_count"] = r.token_count;
  j["provenance_size"] = r.provenance_size;
  if (r.specificity) j["specificity"] = *r.specificity;
  j["summarized"] = r.summarized;
  emit(j.dump());
  signals_.push_back(std::move(r));
}

void RunLedger::record(OverflowRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("overflow", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["node_id"] = r.node_id;
  j["stage"] = r.stage;
  j["requested_tokens"] = r.requested_tokens;
  j["limit_tokens"] = r.limit_tokens;
  emit(j.dump());
  overflows_.push_back(std::move(r));
}

void RunLedger::record(PhaseRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("phase", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["node_id"] = r.node_id;
  j["phase"] = r.phase;
  j["status"] = r.status;
  j["iterations_used"] = r.iterations_used;
  j["scores"] = r.scores;
  j["feedback_tokens"] = r.feedback_tokens;
  j["provenance_size"] = r.provenance_size;
  j["cached"] = r.cached;
  emit(j.dump());
  phases_.push_back(std::move(r));
}

void RunLedger::record(NudgeRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("nudge", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["node_id"] = r.node_id;
  j["beta"] = r.beta;
  j["budget_tokens"] = r.budget_tokens;
  j["edit_tokens"] = r.edit_tokens;
  j["objective_tokens"] = r.objective_tokens;
  j["truncated"] = r.truncated;
  emit(j.dump());
  nudges_.push_back(std::move(r));
}

void RunLedger::record(UpdateRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("update", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["node_id"] = r.node_id;
  j["accepted"] = r.accepted;
  j["candidate_score"] = r.candidate_score;
  j["incumbent_score"] = r.incumbent_score;
  j["temperature"] = r.temperature;
  emit(j.dump());
  updates_.push_back(std::move(r));
}

void RunLedger::record(FailureRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("failure", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["node_id"] = r.node_id;
  j["stage"] = r.stage;
  j["error"] = r.error;
  emit(j.dump());
  failures_.push_back(std::move(r));
}

void RunLedger::record(IterationRecord r) {
  std::lock_guard lock(mutex_);
  auto j = base("iteration", method_, family_, scale_or_depth_, seed_);
  j["iteration"] = r.iteration;
  j["task_index"] = r.task_index;
  j["seed"] = r.seed;
  j["objective"] = r.objective;
  if (r.beta) j["beta"] = *r.beta;
  ordered_json temps = ordered_json::object();
  for (const auto& [id, t] : r.temperatures) temps[id] = t;
  j["temperatures"] = std::move(temps);
  emit(j.dump());
  iterations_.push_back(std::move(r));
}

void RunLedger::note(const std::string& event, const std::string& detail) {
  std::lock_guard lock(mutex_);
  auto j = base("note", method_, family_, scale_or_depth_, seed_);
  j["name"] = event;
  j["detail"] = detail;
  emit(j.dump());
}

std::size_t RunLedger::accepted_updates() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(updates_.begin(), updates_.end(), [](const auto& u) { return u.accepted; }));
}

std::string RunLedger::to_jsonl() const {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

JsonlWriter::JsonlWriter(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::Io, "cannot open trace file " + path);
}

void JsonlWriter::write(const std::string& line) {
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
}

RunLedger::LineSink JsonlWriter::sink() {
  return [this](const std::string& line) { write(line); };
}

}  // namespace tep
