#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tep/error.hpp"
#include "tep/harness.hpp"

using namespace tep;
namespace fs = std::filesystem;

namespace {

ErrorCode config_error(const std::string& doc) {
  try {
    parse_config(doc);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path out_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("tep_harness_test_" + name);
  fs::remove_all(dir);
  return dir;
}

RunConfig small_sweep(const fs::path& dir) {
  auto c = parse_config(R"({"family":"counting","depths":[1,2,3],"methods":["textgrad","tep"],
    "tep":{"t_max":2},"textgrad":{"iterations":2},"tasks":{"train":2,"validation":2},"seed":4})");
  c.output_dir = dir;
  return c;
}

}  // namespace

TEST(Config, MinimalFillsDefaults) {
  auto c = parse_config(R"({"family":"counting","depth":2,"method":"tep"})");
  EXPECT_EQ(c.levels, std::vector<int>{2});
  EXPECT_EQ(c.methods, std::vector<Method>{Method::Tep});
  EXPECT_EQ(c.tep.beta, 1.0);
  EXPECT_EQ(c.tep.epsilon, 0.01);
  EXPECT_EQ(c.tep.t_max, 40);
  EXPECT_EQ(c.tep.beta_decay, 0.9);
  EXPECT_EQ(c.backend.kind, "scripted");
}

TEST(Config, StrictValidation) {
  EXPECT_EQ(config_error(R"({"family":"counting","depth":2,"method":"texgrad"})"),
            ErrorCode::UnknownKey);
  EXPECT_EQ(config_error(R"({"family":"counting","depth":0})"), ErrorCode::RangeError);
  EXPECT_EQ(config_error(R"({"family":"counting","depth":2,"bogus":1})"), ErrorCode::UnknownKey);
  EXPECT_EQ(config_error(R"({"family":"counting","scale":2})"), ErrorCode::UnknownKey);
  EXPECT_EQ(config_error(R"({"family":"code_pipeline","depth":2})"), ErrorCode::UnknownKey);
  EXPECT_EQ(config_error(R"({"family":"counting","tep":{"t_max":"many"}})"), ErrorCode::ConfigParse);
  EXPECT_EQ(config_error("{ not json"), ErrorCode::ConfigParse);
  EXPECT_EQ(config_error(R"({"backend":{"kind":"replay"}})"), ErrorCode::RangeError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), Error);
}

TEST(Config, ReplayForcesStrict) {
  auto c = parse_config(R"({"backend":{"kind":"replay","cache_dir":"/tmp/x"}})");
  EXPECT_TRUE(c.backend.strict);
}

TEST(Methods, ParseAllNames) {
  for (auto m : {Method::Cot, Method::TextGrad, Method::TextGradSum, Method::Tep}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("TEP"), Error);
}

TEST(Experiment, SweepWritesSixRowsAndValidTrace) {
  auto dir = out_dir("sweep");
  auto result = run_experiment(small_sweep(dir));
  EXPECT_EQ(result.rows.size(), 6u);
  auto csv = slurp(result.metrics_path);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "family,scale_or_depth,method,mean_B,rho,gamma_fit,overflow_count,seed,schema_version");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 6);

  std::istringstream trace(slurp(result.trace_path));
  int events = 0;
  while (std::getline(trace, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("event"));
    EXPECT_EQ(j["schema_version"], 1);
    ++events;
  }
  EXPECT_GT(events, 10);
  EXPECT_TRUE(fs::exists(result.summary_path));
  auto params = nlohmann::json::parse(slurp(result.params_path));
  EXPECT_FALSE(params.empty());
}

TEST(Experiment, RepeatedRunIsByteIdentical) {
  auto a = run_experiment(small_sweep(out_dir("det_a")));
  auto b = run_experiment(small_sweep(out_dir("det_b")));
  EXPECT_EQ(slurp(a.trace_path), slurp(b.trace_path));
  EXPECT_EQ(slurp(a.metrics_path), slurp(b.metrics_path));
}

TEST(Experiment, TruncatedTraceStaysLineValid) {
  auto r = run_experiment(small_sweep(out_dir("durable")));
  auto full = slurp(r.trace_path);
  // Whatever prefix of complete lines survives an interruption parses.
  auto cut = full.rfind('\n', full.size() / 2);
  std::istringstream in(full.substr(0, cut + 1));
  std::string line;
  while (std::getline(in, line)) EXPECT_NO_THROW(nlohmann::json::parse(line));
}

TEST(CompareReport, SingleRowFilesJoinSideBySide) {
  std::vector<MetricsRow> tg{{"code_pipeline", 1, "textgrad", 250.0, 0.5, std::nullopt, 0, 1}};
  std::vector<MetricsRow> tp{{"code_pipeline", 1, "tep", 5.0, 0.6, std::nullopt, 0, 1}};
  std::vector<std::string> docs{metrics_csv(tg), metrics_csv(tp)};
  auto report = compare_report(docs);
  EXPECT_NE(report.find("textgrad"), std::string::npos);
  EXPECT_NE(report.find("tep"), std::string::npos);
  EXPECT_NE(report.find("250"), std::string::npos);
  EXPECT_EQ(report.find("gamma"), std::string::npos);
}

TEST(CompareReport, GammaColumnOnlyWithThreeScales) {
  std::vector<MetricsRow> rows;
  for (int s = 1; s <= 3; ++s) rows.push_back({"code_pipeline", s, "textgrad", 100.0 * (1 << s), 0.5, std::nullopt, 0, 1});
  std::vector<std::string> docs{metrics_csv(rows)};
  EXPECT_NE(compare_report(docs).find("gamma"), std::string::npos);
  rows.pop_back();
  docs = {metrics_csv(rows)};
  EXPECT_EQ(compare_report(docs).find("gamma"), std::string::npos);
}

TEST(CompareReport, MissingColumnIsSchemaMismatch) {
  std::vector<std::string> docs{"family,scale_or_depth,mean_B,rho\ncounting,1,2.0,0.5\n"};
  try {
    compare_report(docs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaMismatch);
  }
}
