// tepctl: run optimisation sweeps, replay them from cache, compare metrics and
// generate task files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tep/error.hpp"
#include "tep/harness.hpp"
#include "tep/tasks.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> backend;
  bool strict_replay = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "override the configured seed");
  cmd->add_option("--out", flags.out, "override the output directory");
  cmd->add_option("--backend", flags.backend, "override the backend kind")
      ->check(CLI::IsMember({"scripted", "remote", "replay"}));
  cmd->add_flag("--strict-replay", flags.strict_replay,
                "serve every completion from the cache; a missing entry is an error");
}

int run(const RunFlags& flags, bool force_replay) {
  tep::RunConfig config = tep::load_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out) config.output_dir = *flags.out;
  if (flags.backend) config.backend.kind = *flags.backend;
  if (flags.strict_replay || force_replay || config.backend.kind == "replay") {
    if (!config.backend.cache_dir) {
      throw tep::Error(tep::ErrorCode::RangeError, "replay needs backend.cache_dir in the config");
    }
    config.backend.strict = true;
  }
  const auto result = tep::run_experiment(config);
  std::ifstream summary(result.summary_path);
  std::cout << summary.rdbuf();
  fmt::print("\nwrote {}, {}, {}, {}\n", result.trace_path.string(), result.metrics_path.string(),
             result.summary_path.string(), result.params_path.string());
  return 0;
}

int report_error(const tep::Error& e) {
  nlohmann::ordered_json j;
  j["error"] = tep::to_string(e.code());
  j["message"] = e.detail();
  if (!e.node_id().empty()) j["node_id"] = e.node_id();
  std::cerr << j.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tepctl: compound AI pipeline optimisation experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "execute the configured sweep");
  add_run_flags(run_cmd, run_flags);

  RunFlags replay_flags;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a sweep purely from the replay cache");
  add_run_flags(replay_cmd, replay_flags);

  std::vector<std::string> csvs;
  auto* report_cmd = app.add_subcommand("report", "compare metrics CSVs side by side");
  report_cmd->add_option("csv", csvs, "metrics.csv files")->required()->check(CLI::ExistingFile);

  std::string family = "counting";
  int level = 1;
  std::size_t count = 10;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  auto* gen_cmd = app.add_subcommand("gen-tasks", "write a task set as JSONL");
  gen_cmd->add_option("--family", family)->check(CLI::IsMember({"counting", "code_pipeline"}));
  gen_cmd->add_option("--level", level, "nesting depth (counting)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--count", count)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", seed);
  gen_cmd->add_option("--out", out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(run_flags, false);
    if (*replay_cmd) return run(replay_flags, true);
    if (*report_cmd) {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      std::cout << tep::compare_report_files(paths);
      return 0;
    }
    if (*gen_cmd) {
      const auto tasks = tep::family_tasks(family, level, count, seed);
      const auto jsonl = tep::tasks_to_jsonl(tasks);
      if (!out) {
        std::cout << jsonl;
      } else {
        const std::filesystem::path target(*out);
        if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
        std::ofstream f(*out, std::ios::binary | std::ios::trunc);
        if (!f) throw tep::Error(tep::ErrorCode::Io, fmt::format("cannot write {}", *out));
        f << jsonl;
      }
      return 0;
    }
  } catch (const tep::Error& e) {
    return report_error(e);
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
