#include "tep/tasks.hpp"

#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "json.hpp"
#include "tep/error.hpp"
#include "tep/text.hpp"

namespace tep {

using nlohmann::ordered_json;

namespace {

const std::string& noun(const ContainerNoun& n, std::int64_t count) {
  return count == 1 ? n.singular : n.plural;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw Error(ErrorCode::Overflow, fmt::format("{} * {} overflows 64 bits", a, b));
  }
  return out;
}

}  // namespace

CountingProblem make_counting(std::vector<std::int64_t> counts, std::int64_t per_innermost,
                              std::int64_t discard, const CountingLexicon& lexicon) {
  const auto depth = counts.size();
  if (depth == 0 || depth > lexicon.containers.size()) {
    throw Error(ErrorCode::RangeError,
                fmt::format("depth {} outside 1..{}", depth, lexicon.containers.size()));
  }
  for (auto c : counts) {
    if (c < 1) throw Error(ErrorCode::RangeError, "container counts must be positive");
  }
  if (per_innermost < 1) throw Error(ErrorCode::RangeError, "item count must be positive");
  if (discard < 0) throw Error(ErrorCode::RangeError, "discard must be non-negative");

  std::int64_t product = per_innermost;
  for (auto c : counts) product = checked_mul(product, c);
  if (discard > product) {
    throw Error(ErrorCode::RangeError,
                fmt::format("discard {} exceeds the {} items available", discard, product));
  }

  const auto& box = lexicon.containers;
  std::string text = fmt::format("There {} {} {}.", counts[0] == 1 ? "is" : "are", counts[0],
                                 noun(box[0], counts[0]));
  for (std::size_t i = 0; i < depth; ++i) {
    const bool innermost = i + 1 == depth;
    const std::int64_t n = innermost ? per_innermost : counts[i + 1];
    const auto& inner = innermost ? lexicon.item : box[i + 1];
    text += fmt::format("{}{} {} holds {} {}", i == 0 ? " " : "; ", i == 0 ? "Each" : "each",
                        box[i].singular, n, noun(inner, n));
  }
  text += fmt::format("; {} {} {} discarded. How many {} remain?", discard,
                      noun(lexicon.item, discard), discard == 1 ? "is" : "are",
                      lexicon.item.plural);

  CountingProblem p;
  p.depth = static_cast<int>(depth);
  p.counts = std::move(counts);
  p.per_innermost = per_innermost;
  p.discard = discard;
  p.text = std::move(text);
  p.truth = product - discard;
  return p;
}

CountingProblem gen_counting(int depth, Rng& rng, const CountingRanges& ranges,
                             const CountingLexicon& lexicon) {
  if (depth < 1) throw Error(ErrorCode::RangeError, fmt::format("depth {} < 1", depth));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(depth));
  for (auto& c : counts) c = uniform_int(rng, ranges.factor_min, ranges.factor_max);
  const std::int64_t inner = uniform_int(rng, ranges.innermost_min, ranges.innermost_max);
  std::int64_t product = inner;
  for (auto c : counts) product = checked_mul(product, c);
  std::int64_t discard = uniform_int(rng, 0, ranges.discard_max);
  while (discard >= product) discard = uniform_int(rng, 0, ranges.discard_max);
  return make_counting(std::move(counts), inner, discard, lexicon);
}

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool literal(std::string_view lit) {
    if (!s_.starts_with(lit)) return false;
    s_.remove_prefix(lit.size());
    return true;
  }
  std::optional<std::int64_t> integer() {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s_.data(), s_.data() + s_.size(), v);
    if (ec != std::errc{} || ptr == s_.data()) return std::nullopt;
    s_.remove_prefix(static_cast<std::size_t>(ptr - s_.data()));
    return v;
  }
  std::string_view word() {
    std::size_t n = 0;
    while (n < s_.size() && std::isalpha(static_cast<unsigned char>(s_[n]))) ++n;
    auto w = s_.substr(0, n);
    s_.remove_prefix(n);
    return w;
  }
  bool done() const { return s_.empty(); }
  bool at_digit() const { return !s_.empty() && std::isdigit(static_cast<unsigned char>(s_[0])); }

 private:
  std::string_view s_;
};

bool names(const ContainerNoun& n, std::string_view w, std::int64_t count) {
  return w == noun(n, count);
}

}  // namespace

std::optional<CountingProblem> parse_counting(std::string_view text, const CountingLexicon& lexicon) {
  Cursor c(text::trim(text));
  const auto& box = lexicon.containers;
  if (!c.literal("There ") || !(c.literal("are ") || c.literal("is "))) return std::nullopt;
  auto n1 = c.integer();
  if (!n1 || !c.literal(" ") || box.empty() || !names(box[0], c.word(), *n1) || !c.literal("."))
    return std::nullopt;

  std::vector<std::int64_t> counts{*n1};
  std::optional<std::int64_t> per_innermost;
  for (std::size_t i = 0; !per_innermost; ++i) {
    if (i >= box.size()) return std::nullopt;
    if (!c.literal(i == 0 ? " Each " : "; each ")) return std::nullopt;
    if (c.word() != box[i].singular || !c.literal(" holds ")) return std::nullopt;
    auto n = c.integer();
    if (!n || !c.literal(" ")) return std::nullopt;
    const auto w = c.word();
    if (names(lexicon.item, w, *n)) {
      per_innermost = n;
    } else if (i + 1 < box.size() && names(box[i + 1], w, *n)) {
      counts.push_back(*n);
    } else {
      return std::nullopt;
    }
  }
  if (!c.literal("; ")) return std::nullopt;
  auto k = c.integer();
  if (!k || !c.literal(" ") || !names(lexicon.item, c.word(), *k)) return std::nullopt;
  if (!(c.literal(" are discarded.") || c.literal(" is discarded."))) return std::nullopt;
  if (!c.literal(" How many ") || c.word() != lexicon.item.plural || !c.literal(" remain?") ||
      !c.done())
    return std::nullopt;
  try {
    return make_counting(std::move(counts), *per_innermost, *k, lexicon);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<std::int64_t> last_integer(std::string_view text) {
  std::optional<std::int64_t> last;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    const bool negative = i > 0 && text[i - 1] == '-' &&
                          (i < 2 || !std::isalnum(static_cast<unsigned char>(text[i - 2])));
    std::string digits;
    while (i < text.size()) {
      const char ch = text[i];
      if (std::isdigit(static_cast<unsigned char>(ch))) {
        digits += ch;
        ++i;
      } else if (ch == ',' && i + 3 < text.size() &&
                 std::isdigit(static_cast<unsigned char>(text[i + 1])) &&
                 std::isdigit(static_cast<unsigned char>(text[i + 2])) &&
                 std::isdigit(static_cast<unsigned char>(text[i + 3])) &&
                 (i + 4 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[i + 4])))) {
        ++i;  // thousands separator
      } else {
        break;
      }
    }
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (ec == std::errc{}) last = negative ? -v : v;
  }
  return last;
}

GradeResult grade_exact(std::string_view answer, std::int64_t truth) {
  GradeResult g;
  g.extracted = last_integer(answer);
  g.no_number = !g.extracted;
  g.correct = g.extracted && *g.extracted == truth;
  return g;
}

namespace {

NodeSpec stage(std::string id, std::vector<std::string> parents, std::string role,
               std::string instructions) {
  NodeSpec n;
  n.id = std::move(id);
  n.kind = NodeKind::Stochastic;
  n.parents = std::move(parents);
  n.role_description = role;
  n.params.actor_prompt = fmt::format("Role: {}\n{}", role, instructions);
  n.params.critic_prompt = fmt::format(
      "Rubric focus: judge whether the output fulfils the role \"{}\" and is usable by the next "
      "stage.",
      role);
  n.params.temperature = 0.6;
  return n;
}

}  // namespace

SCGraph build_counting_graph(int depth) {
  if (depth < 1) throw Error(ErrorCode::RangeError, fmt::format("depth {} < 1", depth));
  std::vector<NodeSpec> specs;
  std::string prev;
  auto add = [&](NodeSpec n) {
    prev = n.id;
    specs.push_back(std::move(n));
  };
  for (int i = 1; i <= depth; ++i) {
    add(stage(fmt::format("multiply_{}", i), prev.empty() ? std::vector<std::string>{}
                                                           : std::vector<std::string>{prev},
              fmt::format("arithmetic step {}: multiply the running count by the level-{} "
                          "container factor",
                          i, i),
              "Carry the running tally forward and state the intermediate count."));
    add(stage(fmt::format("verify_{}", i), {prev},
              fmt::format("verification of arithmetic step {}", i),
              "Recheck the previous multiplication and restate the running count."));
  }
  add(stage("aggregate", {prev}, "aggregation: multiply by the items per innermost container",
            "Combine the container counts into the total number of items."));
  add(stage("subtract", {prev}, "subtraction: remove the discarded items and state the answer",
            "Subtract the discarded items and end with the final integer answer."));
  return build_graph(std::move(specs), {"subtract"});
}

SCGraph build_code_pipeline(int scale) {
  std::vector<NodeSpec> specs{
      stage("problem_analysis", {}, "problem analysis: restate requirements and edge cases",
            "Summarise the required behaviour, inputs, outputs and edge cases."),
      stage("code_generation", {"problem_analysis"},
            "code generation: implement the specified function",
            "Write a complete implementation that satisfies the analysis."),
      stage("test_generation", {"code_generation"},
            "test generation: write unit tests for the implementation",
            "Write unit tests covering normal and edge cases."),
      stage("code_refinement", {"test_generation"},
            "code refinement: fix the implementation so that every test passes",
            "Revise the code until all tests pass and report the test tally.")};
  return replicate_with_scale(build_graph(std::move(specs), {"code_refinement"}), scale);
}

TaskInstance to_task(const CountingProblem& problem) {
  TaskInstance t;
  t.input = problem.text;
  t.target = std::to_string(problem.truth);
  t.metadata.emplace(std::string(kGraderKey), "exact");
  t.metadata.emplace(std::string(kTruthKey), t.target);
  t.metadata.emplace("family", "counting");
  t.metadata.emplace("depth", std::to_string(problem.depth));
  return t;
}

std::vector<TaskInstance> gen_counting_tasks(int depth, std::size_t count, std::uint64_t seed) {
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(depth), i));
    out.push_back(to_task(gen_counting(depth, rng)));
  }
  return out;
}

std::vector<TaskInstance> gen_code_tasks(std::size_t count, std::uint64_t seed) {
  static constexpr std::string_view kOps[] = {"sum", "product", "maximum", "count of even values",
                                              "number of distinct values"};
  static constexpr std::string_view kInputs[] = {"a list of integers", "the first n primes",
                                                 "the digits of n", "a sliding window of width k"};
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, 0xc0deULL, i));
    const auto op = kOps[static_cast<std::size_t>(uniform_int(rng, 0, std::size(kOps) - 1))];
    const auto in = kInputs[static_cast<std::size_t>(uniform_int(rng, 0, std::size(kInputs) - 1))];
    TaskInstance t;
    t.input = fmt::format(
        "Write a Python function task_{}(...) that returns the {} of {}. Handle empty input by "
        "returning 0.",
        i, op, in);
    t.target = "all tests pass";
    t.metadata.emplace(std::string(kGraderKey), "tests");
    t.metadata.emplace("family", "code_pipeline");
    out.push_back(std::move(t));
  }
  return out;
}

std::string tasks_to_jsonl(std::span<const TaskInstance> tasks) {
  std::string out;
  for (const auto& t : tasks) {
    ordered_json j;
    j["text"] = t.input;
    j["truth"] = t.target;
    j["metadata"] = ordered_json(t.metadata);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<TaskInstance> tasks_from_jsonl(std::string_view jsonl) {
  std::vector<TaskInstance> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const auto line = text::trim(jsonl.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string() ||
        !j.contains("truth")) {
      throw Error(ErrorCode::ConfigParse, fmt::format("task line {} is not a task record", line_no));
    }
    TaskInstance t;
    t.input = j["text"].get<std::string>();
    t.target = j["truth"].is_string() ? j["truth"].get<std::string>() : j["truth"].dump();
    if (j.contains("metadata") && j["metadata"].is_object()) {
      for (auto& [k, v] : j["metadata"].items()) {
        t.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace tep
