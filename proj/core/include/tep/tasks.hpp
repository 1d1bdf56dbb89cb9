#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tep/graph.hpp"
#include "tep/random.hpp"

namespace tep {

struct ContainerNoun {
  std::string singular;
  std::string plural;
};

struct CountingLexicon {
  /// Outermost container first.
  std::vector<ContainerNoun> containers{
      {"pallet", "pallets"}, {"crate", "crates"},   {"box", "boxes"},     {"bag", "bags"},
      {"pouch", "pouches"},  {"tray", "trays"},     {"tin", "tins"},      {"packet", "packets"},
      {"sleeve", "sleeves"}, {"carton", "cartons"}};
  ContainerNoun item{"screw", "screws"};
};

struct CountingRanges {
  std::int64_t factor_min = 2;
  std::int64_t factor_max = 12;
  std::int64_t innermost_min = 10;
  std::int64_t innermost_max = 50;
  std::int64_t discard_max = 500;
};

/// "There are n_1 pallets. Each pallet holds n_2 crates; ...; each <innermost>
/// holds n_{d+1} screws; k screws are discarded. How many screws remain?"
struct CountingProblem {
  int depth = 0;
  std::vector<std::int64_t> counts;  // n_1..n_d
  std::int64_t per_innermost = 0;    // n_{d+1}
  std::int64_t discard = 0;          // k
  std::string text;
  std::int64_t truth = 0;            // prod(n_i) * n_{d+1} - k
};

/// Renders the problem and computes its truth with overflow checks.
/// Throws Error(RangeError) for an empty or too deep count list, non-positive
/// counts or a discard larger than the product, and Error(Overflow) when the
/// product does not fit in 64 bits.
CountingProblem make_counting(std::vector<std::int64_t> counts, std::int64_t per_innermost,
                              std::int64_t discard, const CountingLexicon& lexicon = {});

/// Draws factors from `ranges` and rejection-samples k until k < product.
CountingProblem gen_counting(int depth, Rng& rng, const CountingRanges& ranges = {},
                             const CountingLexicon& lexicon = {});

/// Recovers the parameters from rendered text; empty when the text does not
/// follow the template.
std::optional<CountingProblem> parse_counting(std::string_view text,
                                              const CountingLexicon& lexicon = {});

struct GradeResult {
  bool correct = false;
  bool no_number = false;
  std::optional<std::int64_t> extracted;
};

/// Last integer literal in `text` ("4,440" reads as 4440).
std::optional<std::int64_t> last_integer(std::string_view text);

GradeResult grade_exact(std::string_view answer, std::int64_t truth);

/// 2d+2 node pipeline: multiply_i / verify_i for i = 1..d, then aggregate and
/// subtract. Throws Error(RangeError) for d < 1.
SCGraph build_counting_graph(int depth);

/// problem_analysis -> code_generation -> test_generation -> code_refinement,
/// replicated to 4s nodes.
SCGraph build_code_pipeline(int scale);

/// Task metadata keys.
inline constexpr std::string_view kGraderKey = "grader";
inline constexpr std::string_view kTruthKey = "truth";

TaskInstance to_task(const CountingProblem& problem);
std::vector<TaskInstance> gen_counting_tasks(int depth, std::size_t count, std::uint64_t seed);
std::vector<TaskInstance> gen_code_tasks(std::size_t count, std::uint64_t seed);

/// One {"text", "truth", "metadata"} object per line.
std::string tasks_to_jsonl(std::span<const TaskInstance> tasks);
std::vector<TaskInstance> tasks_from_jsonl(std::string_view jsonl);

}  // namespace tep
