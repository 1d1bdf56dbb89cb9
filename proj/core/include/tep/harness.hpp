#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/backend.hpp"
#include "tep/ledger.hpp"
#include "tep/metrics.hpp"
#include "tep/mock_world.hpp"
#include "tep/tep.hpp"
#include "tep/textgrad.hpp"

namespace tep {

inline constexpr int kMetricsSchemaVersion = 1;

enum class Method { Cot, TextGrad, TextGradSum, Tep };

std::string_view to_string(Method method) noexcept;
/// Throws Error(UnknownKey) for anything but cot, textgrad, textgrad_sum, tep.
Method parse_method(std::string_view name);

struct BackendConfig {
  std::string kind = "scripted";  // scripted | remote | replay
  std::size_t context_limit = kDefaultContextLimit;
  RemoteConfig remote;
  WorldConfig world;
  std::optional<std::filesystem::path> cache_dir;  // record/replay in front of the backend
  bool strict = false;                             // replay without an upstream
};

struct TaskCounts {
  std::size_t train = 8;
  std::size_t validation = 8;
};

struct RunConfig {
  std::string family = "counting";  // counting | code_pipeline
  std::vector<int> levels{1};       // depths (counting) or scales (code_pipeline)
  std::vector<Method> methods{Method::Tep};
  BackendConfig backend;
  TepConfig tep;
  TextGradConfig textgrad;  // summary_cap applies to textgrad_sum only
  TaskCounts tasks;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
};

/// Parses a JSON configuration document. Unknown keys are rejected
/// (Error(UnknownKey)); malformed JSON raises Error(ConfigParse) and values
/// out of range Error(RangeError).
RunConfig parse_config(std::string_view document);
RunConfig load_config(const std::filesystem::path& path);

/// Backend described by the configuration (scripted world, remote client,
/// optionally behind a replay cache).
BackendHandle make_backend(const BackendConfig& config);

SCGraph build_family_graph(std::string_view family, int level);
std::vector<TaskInstance> family_tasks(std::string_view family, int level, std::size_t count,
                                       std::uint64_t seed);

struct MetricsRow {
  std::string family;
  int scale_or_depth = 0;
  std::string method;
  double mean_b = 0.0;
  std::optional<double> rho;
  std::optional<double> gamma_fit;
  std::size_t overflow_count = 0;
  std::uint64_t seed = 0;
};

std::string metrics_csv(std::span<const MetricsRow> rows);

struct RunOutcome {
  Method method = Method::Tep;
  int level = 0;
  RunLedger ledger;
  DepthMetrics metrics;
  std::vector<NodeParams> final_params;
  std::vector<std::string> node_ids;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::vector<MetricsRow> rows;
  std::uint64_t backend_calls = 0;
  std::uint64_t upstream_calls = 0;  // replay only
  std::filesystem::path trace_path;
  std::filesystem::path metrics_path;
  std::filesystem::path summary_path;
  std::filesystem::path params_path;
};

/// Runs every (level, method) pair of the sweep and writes trace.jsonl,
/// metrics.csv, summary.txt and final_params.json to the output directory.
ExperimentResult run_experiment(const RunConfig& config);
/// As above with an explicit backend (shared by every run of the sweep).
ExperimentResult run_experiment(const RunConfig& config, BackendHandle backend);

/// Side-by-side "B / rho" per method and scale from metrics CSVs, with a
/// fitted growth column when at least three scales are present. Throws
/// Error(SchemaMismatch) when a CSV lacks a required column or the files
/// disagree on their header.
std::string compare_report(std::span<const std::string> csv_documents);
std::string compare_report_files(std::span<const std::filesystem::path> csv_paths);

}  // namespace tep
