#include "tep/harness.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "json.hpp"
#include "tep/error.hpp"
#include "tep/tasks.hpp"
#include "tep/validation.hpp"

namespace tep {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Method method) noexcept {
  switch (method) {
    case Method::Cot: return "cot";
    case Method::TextGrad: return "textgrad";
    case Method::TextGradSum: return "textgrad_sum";
    case Method::Tep: return "tep";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::Cot, Method::TextGrad, Method::TextGradSum, Method::Tep}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::UnknownKey,
              fmt::format("unknown method '{}' (expected cot, textgrad, textgrad_sum or tep)", name));
}

namespace {

// ---------------------------------------------------------------------------
// Strict JSON reading

void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) throw Error(ErrorCode::ConfigParse, fmt::format("{} must be an object", where));
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw Error(ErrorCode::UnknownKey, fmt::format("unknown key '{}' in {}", k, where));
    }
  }
}

template <typename T>
T read(const json& v, std::string_view key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("not a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("not an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          throw Error(ErrorCode::RangeError, fmt::format("'{}' must be non-negative", key));
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("not a number");
    } else {
      if (!v.is_string()) throw std::invalid_argument("not a string");
    }
    return v.get<T>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ConfigParse, fmt::format("'{}': {}", key, e.what()));
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = read<T>(obj[key], key);
}

void require(bool ok, std::string message) {
  if (!ok) throw Error(ErrorCode::RangeError, std::move(message));
}

WorldConfig parse_world(const json& j) {
  only_keys(j, "backend.world",
            {"checks_per_stage", "initial_level", "critic_pad_tokens", "critic_elaboration",
             "actionability", "specificity_decay", "score_base", "score_step", "stylistic_above",
             "error_probability"});
  WorldConfig w;
  maybe(j, "checks_per_stage", w.checks_per_stage);
  maybe(j, "initial_level", w.initial_level);
  maybe(j, "critic_pad_tokens", w.critic_pad_tokens);
  maybe(j, "critic_elaboration", w.critic_elaboration);
  maybe(j, "actionability", w.actionability);
  if (j.contains("specificity_decay") && !j["specificity_decay"].is_null()) {
    w.specificity_decay = read<double>(j["specificity_decay"], "specificity_decay");
    require(*w.specificity_decay > 0.0 && *w.specificity_decay <= 1.0,
            "specificity_decay must be in (0, 1]");
  }
  maybe(j, "score_base", w.score_base);
  maybe(j, "score_step", w.score_step);
  maybe(j, "stylistic_above", w.stylistic_above);
  maybe(j, "error_probability", w.error_probability);
  require(w.checks_per_stage >= 1, "checks_per_stage must be >= 1");
  require(w.initial_level >= 0 && w.initial_level <= w.checks_per_stage,
          "initial_level must be within 0..checks_per_stage");
  require(w.actionability >= 0.0 && w.actionability <= 1.0, "actionability must be in [0, 1]");
  require(w.error_probability >= 0.0 && w.error_probability <= 1.0,
          "error_probability must be in [0, 1]");
  require(w.critic_elaboration >= 0.0, "critic_elaboration must be >= 0");
  return w;
}

BackendConfig parse_backend(const json& j) {
  only_keys(j, "backend",
            {"kind", "context_limit", "url", "model", "api_key_env", "timeout_seconds",
             "max_retries", "cache_dir", "strict", "world"});
  BackendConfig b;
  maybe(j, "kind", b.kind);
  if (b.kind != "scripted" && b.kind != "remote" && b.kind != "replay") {
    throw Error(ErrorCode::UnknownKey, fmt::format("unknown backend kind '{}'", b.kind));
  }
  maybe(j, "context_limit", b.context_limit);
  require(b.context_limit > 0, "context_limit must be positive");
  maybe(j, "url", b.remote.url);
  maybe(j, "model", b.remote.model);
  maybe(j, "api_key_env", b.remote.api_key_env);
  maybe(j, "timeout_seconds", b.remote.timeout_seconds);
  maybe(j, "max_retries", b.remote.max_retries);
  require(b.remote.max_retries >= 0, "max_retries must be >= 0");
  require(b.remote.timeout_seconds > 0, "timeout_seconds must be positive");
  if (j.contains("cache_dir")) b.cache_dir = read<std::string>(j["cache_dir"], "cache_dir");
  maybe(j, "strict", b.strict);
  if (j.contains("world")) b.world = parse_world(j["world"]);
  if (b.kind == "replay") {
    require(b.cache_dir.has_value(), "replay backend needs cache_dir");
    b.strict = true;
  }
  return b;
}

TepConfig parse_tep(const json& j) {
  only_keys(j, "tep",
            {"beta", "beta_decay", "epsilon", "t_max", "free_iteration_cap", "nudged_iteration_cap",
             "edit_budget_tokens", "parent_budget_tokens", "equilibrium_window",
             "equilibrium_epsilon", "skip_threshold", "stylistic_keywords", "max_threads",
             "cache_equilibria"});
  TepConfig t;
  maybe(j, "beta", t.beta);
  maybe(j, "beta_decay", t.beta_decay);
  maybe(j, "epsilon", t.epsilon);
  maybe(j, "t_max", t.t_max);
  maybe(j, "free_iteration_cap", t.free_iteration_cap);
  maybe(j, "nudged_iteration_cap", t.nudged_iteration_cap);
  maybe(j, "edit_budget_tokens", t.edit_budget_tokens);
  maybe(j, "parent_budget_tokens", t.parent_budget_tokens);
  maybe(j, "equilibrium_window", t.equilibrium_window);
  maybe(j, "equilibrium_epsilon", t.equilibrium_epsilon);
  maybe(j, "skip_threshold", t.skip_threshold);
  maybe(j, "max_threads", t.max_threads);
  maybe(j, "cache_equilibria", t.cache_equilibria);
  if (j.contains("stylistic_keywords")) {
    const auto& arr = j["stylistic_keywords"];
    if (!arr.is_array()) throw Error(ErrorCode::ConfigParse, "stylistic_keywords must be an array");
    t.keywords.stylistic.clear();
    for (const auto& k : arr) t.keywords.stylistic.push_back(read<std::string>(k, "stylistic_keywords"));
  }
  require(t.beta > 0.0, "tep.beta must be positive");
  require(t.beta_decay > 0.0 && t.beta_decay <= 1.0, "tep.beta_decay must be in (0, 1]");
  require(t.epsilon >= 0.0, "tep.epsilon must be >= 0");
  require(t.t_max >= 1, "tep.t_max must be >= 1");
  require(t.free_iteration_cap >= 0 && t.nudged_iteration_cap >= 0, "iteration caps must be >= 0");
  require(t.edit_budget_tokens >= 1, "tep.edit_budget_tokens must be >= 1");
  require(t.equilibrium_window >= 1, "tep.equilibrium_window must be >= 1");
  return t;
}

TextGradConfig parse_textgrad(const json& j) {
  only_keys(j, "textgrad", {"iterations", "summary_cap", "max_threads"});
  TextGradConfig t;
  t.summary_cap = 100;
  maybe(j, "iterations", t.iterations);
  maybe(j, "max_threads", t.max_threads);
  if (j.contains("summary_cap")) t.summary_cap = read<std::size_t>(j["summary_cap"], "summary_cap");
  require(t.iterations >= 1, "textgrad.iterations must be >= 1");
  require(*t.summary_cap >= 1, "textgrad.summary_cap must be >= 1");
  return t;
}

std::vector<int> parse_levels(const json& doc, const char* single, const char* plural) {
  if (doc.contains(single) && doc.contains(plural)) {
    throw Error(ErrorCode::ConfigParse, fmt::format("give either '{}' or '{}'", single, plural));
  }
  std::vector<int> levels;
  if (doc.contains(single)) levels.push_back(read<int>(doc[single], single));
  if (doc.contains(plural)) {
    if (!doc[plural].is_array() || doc[plural].empty()) {
      throw Error(ErrorCode::ConfigParse, fmt::format("'{}' must be a non-empty array", plural));
    }
    for (const auto& v : doc[plural]) levels.push_back(read<int>(v, plural));
  }
  return levels;
}

}  // namespace

RunConfig parse_config(std::string_view document) {
  json doc = json::parse(document, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::ConfigParse, "configuration is not valid JSON");
  only_keys(doc, "configuration",
            {"family", "depth", "depths", "scale", "scales", "method", "methods", "backend", "tep",
             "textgrad", "tasks", "seed", "output_dir"});

  RunConfig c;
  c.textgrad.summary_cap = 100;
  maybe(doc, "family", c.family);
  if (c.family != "counting" && c.family != "code_pipeline") {
    throw Error(ErrorCode::UnknownKey, fmt::format("unknown family '{}'", c.family));
  }
  const bool counting = c.family == "counting";
  static constexpr std::array<const char*, 2> kScaleKeys{"scale", "scales"};
  static constexpr std::array<const char*, 2> kDepthKeys{"depth", "depths"};
  for (const char* k : counting ? kScaleKeys : kDepthKeys) {
    if (doc.contains(k)) {
      throw Error(ErrorCode::UnknownKey, fmt::format("'{}' does not apply to family {}", k, c.family));
    }
  }
  auto levels = counting ? parse_levels(doc, "depth", "depths") : parse_levels(doc, "scale", "scales");
  if (!levels.empty()) c.levels = std::move(levels);
  for (int l : c.levels) {
    require(l >= 1, fmt::format("{} must be >= 1, got {}", counting ? "depth" : "scale", l));
    if (counting) require(l <= 10, fmt::format("depth {} exceeds the container lexicon (10)", l));
  }

  if (doc.contains("method") && doc.contains("methods")) {
    throw Error(ErrorCode::ConfigParse, "give either 'method' or 'methods'");
  }
  if (doc.contains("method")) c.methods = {parse_method(read<std::string>(doc["method"], "method"))};
  if (doc.contains("methods")) {
    if (!doc["methods"].is_array() || doc["methods"].empty()) {
      throw Error(ErrorCode::ConfigParse, "'methods' must be a non-empty array");
    }
    c.methods.clear();
    for (const auto& m : doc["methods"]) c.methods.push_back(parse_method(read<std::string>(m, "methods")));
  }

  if (doc.contains("backend")) c.backend = parse_backend(doc["backend"]);
  if (doc.contains("tep")) c.tep = parse_tep(doc["tep"]);
  if (doc.contains("textgrad")) c.textgrad = parse_textgrad(doc["textgrad"]);
  if (doc.contains("tasks")) {
    only_keys(doc["tasks"], "tasks", {"train", "validation"});
    maybe(doc["tasks"], "train", c.tasks.train);
    maybe(doc["tasks"], "validation", c.tasks.validation);
    require(c.tasks.train >= 1 && c.tasks.validation >= 1, "task counts must be >= 1");
  }
  maybe(doc, "seed", c.seed);
  if (doc.contains("output_dir")) c.output_dir = read<std::string>(doc["output_dir"], "output_dir");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, fmt::format("cannot read {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

BackendHandle make_backend(const BackendConfig& config) {
  BackendHandle base;
  if (config.kind == "scripted") {
    WorldConfig w = config.world;
    w.context_limit = config.context_limit;
    base = make_pipeline_world(w);
  } else if (config.kind == "remote") {
    RemoteConfig r = config.remote;
    r.context_limit = config.context_limit;
    base = std::make_shared<RemoteBackend>(r);
  }
  if (!config.cache_dir) return base;
  return std::make_shared<ReplayBackend>(config.strict ? nullptr : base, *config.cache_dir,
                                         config.strict, config.context_limit);
}

SCGraph build_family_graph(std::string_view family, int level) {
  if (family == "counting") return build_counting_graph(level);
  if (family == "code_pipeline") return build_code_pipeline(level);
  throw Error(ErrorCode::UnknownKey, fmt::format("unknown family '{}'", family));
}

std::vector<TaskInstance> family_tasks(std::string_view family, int level, std::size_t count,
                                       std::uint64_t seed) {
  if (family == "counting") return gen_counting_tasks(level, count, seed);
  if (family == "code_pipeline") return gen_code_tasks(count, seed);
  throw Error(ErrorCode::UnknownKey, fmt::format("unknown family '{}'", family));
}

namespace {

std::string csv_number(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out =
      "family,scale_or_depth,method,mean_B,rho,gamma_fit,overflow_count,seed,schema_version\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.family, r.scale_or_depth, r.method,
                       csv_number(r.mean_b), r.rho ? csv_number(*r.rho) : "",
                       r.gamma_fit ? csv_number(*r.gamma_fit) : "", r.overflow_count, r.seed,
                       kMetricsSchemaVersion);
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, fmt::format("cannot write {}", path.string()));
  out << content;
}

RunOutcome run_one(const RunConfig& config, Method method, int level, BackendHandle backend,
                   const RunLedger::LineSink& sink) {
  RunOutcome out;
  out.method = method;
  out.level = level;
  out.ledger.set_context(std::string(to_string(method)), config.family, level, config.seed);
  out.ledger.set_sink(sink);

  const SCGraph graph = build_family_graph(config.family, level);
  for (const auto& n : graph.nodes()) out.node_ids.push_back(n.id);
  const auto run_seed = derive_seed(config.seed, static_cast<std::uint64_t>(level));
  const auto train = family_tasks(config.family, level, config.tasks.train, derive_seed(run_seed, 1));
  const auto validation =
      family_tasks(config.family, level, config.tasks.validation, derive_seed(run_seed, 2));

  out.ledger.note("run_start", fmt::format("{} nodes, backend {}", graph.size(), backend->describe()));
  switch (method) {
    case Method::Cot: {
      PipelineValidator validator(graph, validation, backend, derive_seed(run_seed, 0x7a11dULL));
      out.final_params = graph.params();
      IterationRecord it;
      it.objective = 1.0 - validator.score(out.final_params);
      out.ledger.record(std::move(it));
      break;
    }
    case Method::TextGrad:
    case Method::TextGradSum: {
      TextGradConfig tg = config.textgrad;
      if (method == Method::TextGrad) tg.summary_cap.reset();
      out.final_params =
          run_textgrad(graph, train, validation, backend, tg, run_seed, out.ledger).params;
      break;
    }
    case Method::Tep:
      out.final_params = run_tep(graph, train, validation, backend, config.tep, run_seed, out.ledger).params;
      break;
  }
  out.ledger.note("run_end", fmt::format("{} signals, {} updates", out.ledger.signals().size(),
                                         out.ledger.attempted_updates()));
  out.metrics = depth_metrics(out.ledger, level);
  return out;
}

}  // namespace

ExperimentResult run_experiment(const RunConfig& config) {
  return run_experiment(config, make_backend(config.backend));
}

ExperimentResult run_experiment(const RunConfig& config, BackendHandle backend) {
  std::filesystem::create_directories(config.output_dir);
  ExperimentResult result;
  result.trace_path = config.output_dir / "trace.jsonl";
  result.metrics_path = config.output_dir / "metrics.csv";
  result.summary_path = config.output_dir / "summary.txt";
  result.params_path = config.output_dir / "final_params.json";

  JsonlWriter writer(result.trace_path.string());
  const auto sink = writer.sink();
  for (int level : config.levels) {
    for (Method m : config.methods) result.runs.push_back(run_one(config, m, level, backend, sink));
  }

  std::map<Method, std::optional<double>> gamma;
  for (Method m : config.methods) {
    std::vector<std::pair<double, double>> series;
    for (const auto& r : result.runs) {
      if (r.method == m) series.emplace_back(r.level, r.metrics.mean_feedback_tokens);
    }
    try {
      gamma[m] = fit_growth(series).gamma;
    } catch (const Error&) {
      gamma[m] = std::nullopt;  // fewer than three levels or no feedback at all
    }
  }
  for (const auto& r : result.runs) {
    result.rows.push_back(MetricsRow{config.family, r.level, std::string(to_string(r.method)),
                                     r.metrics.mean_feedback_tokens, r.metrics.update_rate,
                                     gamma[r.method], r.metrics.overflow_count, config.seed});
  }

  const std::string csv = metrics_csv(result.rows);
  write_file(result.metrics_path, csv);

  ordered_json params;
  params["schema_version"] = kTraceSchemaVersion;
  params["runs"] = ordered_json::array();
  for (const auto& r : result.runs) {
    ordered_json run;
    run["method"] = to_string(r.method);
    run["family"] = config.family;
    run["scale_or_depth"] = r.level;
    run["nodes"] = ordered_json::array();
    for (std::size_t i = 0; i < r.final_params.size(); ++i) {
      run["nodes"].push_back({{"id", r.node_ids[i]},
                              {"actor_prompt", r.final_params[i].actor_prompt},
                              {"critic_prompt", r.final_params[i].critic_prompt},
                              {"temperature", r.final_params[i].temperature}});
    }
    params["runs"].push_back(std::move(run));
  }
  write_file(result.params_path, params.dump(2) + "\n");

  std::vector<std::string_view> method_names;
  for (Method m : config.methods) method_names.push_back(to_string(m));
  std::string summary = fmt::format("family: {}\nseed: {}\nlevels: {}\nmethods: {}\n\n", config.family,
                                    config.seed, fmt::join(config.levels, ", "),
                                    fmt::join(method_names, ", "));
  const std::string docs[] = {csv};
  summary += compare_report(docs);
  summary += "\nB = mean feedback tokens per signal, rho = accepted / attempted updates\n";
  for (const auto& r : result.runs) {
    if (r.metrics.overflow_count > 0) {
      summary += fmt::format("{} at {}: {} context overflows\n", to_string(r.method), r.level,
                             r.metrics.overflow_count);
    }
  }
  write_file(result.summary_path, summary);

  result.backend_calls = backend->calls();
  if (auto* replay = dynamic_cast<ReplayBackend*>(backend.get())) {
    result.upstream_calls = replay->upstream_calls();
  }
  return result;
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    cells.emplace_back(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

CsvTable parse_csv(std::string_view doc) {
  CsvTable t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < doc.size()) {
    auto end = doc.find('\n', pos);
    if (end == std::string_view::npos) end = doc.size();
    auto line = doc.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    if (line.empty()) continue;
    if (first) {
      t.header = split_csv_line(line);
      first = false;
    } else {
      t.rows.push_back(split_csv_line(line));
    }
  }
  return t;
}

}  // namespace

std::string compare_report(std::span<const std::string> csv_documents) {
  static constexpr std::string_view kRequired[] = {"family", "scale_or_depth", "method", "mean_B", "rho"};
  std::optional<std::vector<std::string>> header;
  struct Cell {
    double b;
    std::string rho;
  };
  std::vector<std::string> row_order;
  std::map<std::string, std::map<int, Cell>> cells;
  std::set<int> scales;
  std::set<std::string> families;

  for (const auto& doc : csv_documents) {
    auto table = parse_csv(doc);
    for (auto col : kRequired) {
      if (std::find(table.header.begin(), table.header.end(), col) == table.header.end()) {
        throw Error(ErrorCode::SchemaMismatch, fmt::format("metrics CSV lacks column '{}'", col));
      }
    }
    if (header && *header != table.header) {
      throw Error(ErrorCode::SchemaMismatch, "metrics CSVs have different headers");
    }
    header = table.header;
    auto col = [&](std::string_view name) {
      return static_cast<std::size_t>(
          std::find(table.header.begin(), table.header.end(), name) - table.header.begin());
    };
    const auto fam = col("family"), lvl = col("scale_or_depth"), met = col("method"),
               mb = col("mean_B"), rho = col("rho");
    for (const auto& row : table.rows) {
      if (row.size() != table.header.size()) {
        throw Error(ErrorCode::SchemaMismatch, "metrics CSV row has the wrong number of cells");
      }
      int level = 0;
      double b = 0.0;
      try {
        level = std::stoi(row[lvl]);
        b = std::stod(row[mb]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaMismatch, "non-numeric scale_or_depth or mean_B");
      }
      families.insert(row[fam]);
      const std::string key = row[met];
      if (!cells.contains(key)) row_order.push_back(key);
      cells[key][level] = Cell{b, row[rho]};
      scales.insert(level);
    }
  }
  if (!header) throw Error(ErrorCode::SchemaMismatch, "no metrics CSV given");

  const bool with_gamma = scales.size() >= 3;
  const std::string axis =
      families.size() == 1 ? (*families.begin() == "counting" ? "d" : "s") : "level";

  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> head{"method"};
  for (int s : scales) head.push_back(fmt::format("{}={}", axis, s));
  if (with_gamma) head.push_back("gamma");
  grid.push_back(head);
  for (const auto& m : row_order) {
    std::vector<std::string> line{m};
    std::vector<std::pair<double, double>> series;
    for (int s : scales) {
      auto it = cells[m].find(s);
      if (it == cells[m].end()) {
        line.emplace_back("-");
        continue;
      }
      line.push_back(fmt::format("{:.1f} / {}", it->second.b,
                                 it->second.rho.empty() ? "-" : it->second.rho.substr(0, 5)));
      series.emplace_back(s, it->second.b);
    }
    if (with_gamma) {
      try {
        line.push_back(fmt::format("{:.3f}", fit_growth(series).gamma));
      } catch (const Error&) {
        line.emplace_back("-");
      }
    }
    grid.push_back(std::move(line));
  }

  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t i = 0; i < grid[r].size(); ++i) {
      out += fmt::format("{}{:<{}}", i == 0 ? "" : " | ", grid[r][i], width[i]);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
    if (r == 0) {
      for (std::size_t i = 0; i < width.size(); ++i) {
        out += fmt::format("{}{}", i == 0 ? "" : "-+-", std::string(width[i], '-'));
      }
      out += '\n';
    }
  }
  return out;
}

std::string compare_report_files(std::span<const std::filesystem::path> csv_paths) {
  std::vector<std::string> docs;
  for (const auto& p : csv_paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, fmt::format("cannot read {}", p.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    docs.push_back(buf.str());
  }
  return compare_report(docs);
}

}  // namespace tep
