#include <gtest/gtest.h>

#include <cmath>

#include "tep/error.hpp"
#include "tep/metrics.hpp"
#include "tep/ledger.hpp"
#include "tep/mock_world.hpp"
#include "tep/prompts.hpp"
#include "tep/tasks.hpp"
#include "tep/text.hpp"
#include "tep/textgrad.hpp"

using namespace tep;

namespace {

std::string incoming(const CompletionRequest& r) {
  if (auto d = text::find_section(r.user_text, sections::kDownstreamFeedback)) return std::string(*d);
  return std::string(text::find_section(r.user_text, sections::kLoss).value_or(""));
}

// Critic restates what it received and adds 50 words; summarizer keeps ten
// words; update operator always proposes "revised".
BackendHandle concatenating_backend(std::optional<double> decay = std::nullopt,
                                    std::size_t limit = kDefaultContextLimit) {
  ScriptedBehavior b;
  b.rules.push_back({"critic", std::string(prompts::kGradientCritic), MatchField::System,
                     [](const CompletionRequest& r) { return incoming(r); }, 50});
  b.rules.push_back({"summarizer", std::string(prompts::kSummarizer), MatchField::System,
                     [](const CompletionRequest& r) {
                       auto fb = text::find_section(r.user_text, sections::kFeedback).value();
                       return "summary " + std::string(truncate_tokens(fb, 9));
                     },
                     0});
  b.rules.push_back({"update", std::string(prompts::kUpdateOperator), MatchField::System,
                     script::fixed("<prompt>revised</prompt>"), 0});
  b.specificity_decay = decay;
  return std::make_shared<ScriptedBackend>(b, limit);
}

NodeSpec node(std::string id, std::vector<std::string> parents = {}) {
  NodeSpec s;
  s.id = id;
  s.parents = std::move(parents);
  s.params.actor_prompt = "Role: " + id;
  s.role_description = id + " stage";
  return s;
}

SCGraph chain(int n) {
  std::vector<NodeSpec> specs;
  for (int i = 0; i < n; ++i) {
    specs.push_back(i == 0 ? node("n0") : node("n" + std::to_string(i), {"n" + std::to_string(i - 1)}));
  }
  return build_graph(specs, {"n" + std::to_string(n - 1)});
}

ExecutionTrace fake_trace(const SCGraph& g) {
  ExecutionTrace t;
  for (const auto& n : g.nodes()) t.outputs.push_back({n.id, "output of " + n.id, 3, 1});
  return t;
}

}  // namespace

TEST(CritiqueNode, SinkStartsTheChain) {
  auto backend = concatenating_backend();
  auto n = node("sink");
  NodeOutput out{"sink", "42", 1, 1};
  auto g = critique_node(n, n.params, out, nullptr, "target: 1; produced: 42; graded: incorrect",
                         *backend);
  EXPECT_EQ(g.provenance, std::set<std::string>{"sink"});
  EXPECT_EQ(g.hop_distance, 0);
  EXPECT_EQ(g.token_count, token_count(g.text));
  EXPECT_EQ(g.token_count, 6u + 50u);
}

TEST(CritiqueNode, PaddingCriticGrowsFiftyPerHop) {
  auto backend = concatenating_backend();
  std::optional<FeedbackSignal> g;
  std::size_t last = 0;
  for (int hop = 0; hop < 5; ++hop) {
    auto n = node("v" + std::to_string(hop));
    NodeOutput out{n.id, "z", 1, 1};
    g = critique_node(n, n.params, out, g ? &*g : nullptr, "loss", *backend);
    if (hop > 0) EXPECT_GE(g->token_count, last + 50);
    EXPECT_EQ(g->hop_distance, hop);
    last = g->token_count;
  }
  EXPECT_EQ(g->provenance.size(), 5u);
}

TEST(CritiqueNode, OversizedDownstreamOverflows) {
  auto backend = concatenating_backend();
  auto n = node("v");
  const std::string local = text::pad_words(10000);
  NodeOutput out{"v", local, 10000, 1};
  auto downstream = make_signal(text::pad_words(120000), {"w"}, std::nullopt, 0);
  try {
    critique_node(n, n.params, out, &downstream, "", *backend);
    FAIL();
  } catch (const ContextOverflowError& e) {
    EXPECT_EQ(e.node_id(), "v");
    EXPECT_GT(e.requested_tokens(), 130000u);
    EXPECT_EQ(e.limit_tokens(), kDefaultContextLimit);
  }
}

TEST(SummarizeFeedback, RespectsCap) {
  auto backend = concatenating_backend(0.6);
  auto g = make_signal(text::pad_words(500), {"a", "b"}, 1.0, 2);
  auto s = summarize_feedback(g, 100, *backend);
  EXPECT_LE(s.token_count, 100u);
  EXPECT_EQ(s.provenance, g.provenance);
  EXPECT_EQ(s.hop_distance, 2);
  EXPECT_TRUE(s.summarized);
  EXPECT_DOUBLE_EQ(*s.specificity, 0.6);
}

TEST(SummarizeFeedback, WithinCapIsUnchanged) {
  auto backend = concatenating_backend(0.6);
  auto g = make_signal("short feedback", {"a"}, 1.0, 0);
  auto s = summarize_feedback(g, 100, *backend);
  EXPECT_EQ(s.text, g.text);
  EXPECT_EQ(s.specificity, g.specificity);
  EXPECT_FALSE(s.summarized);
  EXPECT_EQ(backend->calls(), 0u);
}

TEST(SummarizeFeedback, ThreeCompressionsDecayGeometrically) {
  auto backend = concatenating_backend(0.6);
  auto g = make_signal(text::pad_words(500), {"a"}, 1.0, 0);
  for (int k = 1; k <= 3; ++k) {
    if (k > 1) g = make_signal(g.text + " " + text::pad_words(500), g.provenance, g.specificity, 0);
    g = summarize_feedback(g, 5, *backend);
    EXPECT_DOUBLE_EQ(*g.specificity, std::pow(0.6, k));
  }
  EXPECT_NEAR(*g.specificity, 0.216, 1e-12);
}

TEST(SummarizeFeedback, OverlongSummaryIsTruncated) {
  ScriptedBehavior b;
  b.fallback.respond = script::fixed(text::pad_words(300));
  ScriptedBackend backend(b);
  auto g = make_signal(text::pad_words(500), {"a"}, std::nullopt, 0);
  auto s = summarize_feedback(g, 100, backend);
  EXPECT_EQ(s.token_count, 100u);
  EXPECT_FALSE(s.specificity);
}

TEST(ExtractPrompt, RequiresTags) {
  EXPECT_EQ(extract_prompt("sure!\n<prompt>\n new text \n</prompt>"), "new text");
  EXPECT_THROW(extract_prompt("no tags"), Error);
  EXPECT_THROW(extract_prompt("<prompt>  </prompt>"), Error);
  try {
    extract_prompt("</prompt><prompt>");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedUpdate);
  }
}

TEST(Backprop, SingleNodeIsOneCritiqueAndUpdate) {
  auto g = chain(1);
  auto backend = concatenating_backend();
  auto params = g.params();
  auto r = backprop_update(g, params, fake_trace(g), "loss", *backend, {});
  ASSERT_TRUE(r.local[0]);
  EXPECT_EQ(r.local[0]->hop_distance, 0);
  EXPECT_TRUE(r.attempted[0]);
  EXPECT_EQ(r.candidates[0]->actor_prompt, "revised");
  EXPECT_EQ(backend->calls(), 2u);
}

TEST(Backprop, ConcatenationAccumulatesTowardSource) {
  for (int s = 1; s <= 3; ++s) {
    auto g = build_code_pipeline(s);
    auto backend = concatenating_backend();
    auto params = g.params();
    RunLedger ledger;
    auto r = backprop_update(g, params, fake_trace(g), "loss", *backend, {}, &ledger);
    const auto source = 0u;
    const auto sink = g.size() - 1;
    EXPECT_GT(r.local[source]->token_count, r.local[sink]->token_count);
    // Provenance of the source covers every node on the path.
    EXPECT_EQ(r.local[source]->provenance.size(), g.size());
    // Non-decreasing in hop distance.
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      EXPECT_GE(r.local[i]->token_count, r.local[i + 1]->token_count);
      EXPECT_EQ(r.local[i]->hop_distance, r.local[i + 1]->hop_distance + 1);
    }
    EXPECT_EQ(ledger.signals().size(), g.size());
  }
}

TEST(Backprop, CapBoundsEveryTransmittedSignal) {
  auto g = build_code_pipeline(4);
  auto backend = concatenating_backend(0.6);
  auto params = g.params();
  RunLedger ledger;
  auto r = backprop_update(g, params, fake_trace(g), "loss", *backend,
                           BackpropOptions{100, 0, 0, 0}, &ledger);
  for (const auto& s : ledger.signals()) EXPECT_LE(s.token_count, 100u) << s.node_id;
  for (const auto& t : r.transmitted) EXPECT_LE(t->token_count, 100u);
  // Local critiques are bounded by the cap plus the critic's own contribution.
  for (const auto& l : r.local) EXPECT_LE(l->token_count, 100u + 50u);
  // Each hop after the first compresses once more.
  EXPECT_LT(*r.local[0]->specificity, *r.local[g.size() - 1]->specificity);
}

TEST(Backprop, FanInConcatenatesChildrenInReverseOrder) {
  auto g = build_graph({node("a"), node("b", {"a"}), node("c", {"a"}), node("d", {"b", "c"})},
                       {"d"});
  auto backend = concatenating_backend();
  auto params = g.params();
  auto trace = fake_trace(g);
  auto r = backprop_update(g, params, trace, "L", *backend, {});
  const auto& a = *r.local[0];
  EXPECT_EQ(a.provenance, (std::set<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(a.hop_distance, 2);
  // c's feedback precedes b's in the aggregate.
  const auto& b = r.local[1]->text;
  const auto& c = r.local[2]->text;
  EXPECT_EQ(a.text.substr(0, c.size() + 1 + b.size()), c + "\n" + b);
}

TEST(Backprop, OverflowKeepsParamsAndIsRecorded) {
  auto g = build_code_pipeline(5);
  auto backend = concatenating_backend(std::nullopt, 600);
  auto params = g.params();
  RunLedger ledger;
  auto r = backprop_update(g, params, fake_trace(g), "loss", *backend, {}, &ledger);
  ASSERT_FALSE(ledger.overflows().empty());
  const auto& first = ledger.overflows().front();
  EXPECT_EQ(first.stage, "critique");
  EXPECT_EQ(first.limit_tokens, 600u);
  const auto idx = *g.index_of(first.node_id);
  EXPECT_FALSE(r.local[idx]);
  EXPECT_FALSE(r.candidates[idx]);
  EXPECT_FALSE(r.attempted[idx]);
  // Upstream of the overflow nothing reaches the parents.
  for (std::size_t i = 0; i < idx; ++i) EXPECT_FALSE(r.attempted[i]);
  EXPECT_FALSE(ledger.failures().empty());
  EXPECT_EQ(ledger.failures().front().error, "starved");
}

TEST(Backprop, MalformedUpdateCountsAsAttempt) {
  ScriptedBehavior b;
  b.fallback.respond = script::fixed("I would rather not");
  auto backend = std::make_shared<ScriptedBackend>(b);
  auto g = chain(2);
  auto params = g.params();
  RunLedger ledger;
  auto r = backprop_update(g, params, fake_trace(g), "loss", *backend, {}, &ledger);
  EXPECT_TRUE(r.attempted[0]);
  EXPECT_TRUE(r.attempted[1]);
  EXPECT_FALSE(r.candidates[0]);
  EXPECT_EQ(ledger.failures().size(), 2u);
}

TEST(RunTextGrad, GateNeverAcceptsARegression) {
  WorldConfig world;
  world.specificity_decay = 0.6;
  auto backend = make_pipeline_world(world);
  auto g = build_code_pipeline(2);
  auto train = gen_code_tasks(3, 1);
  auto val = gen_code_tasks(2, 2);
  RunLedger ledger;
  auto result = run_textgrad(g, train, val, backend, TextGradConfig{6, 100, 0}, 5, ledger);
  EXPECT_EQ(result.objective.size(), 6u);
  EXPECT_GT(ledger.attempted_updates(), 0u);
  for (const auto& u : ledger.updates()) {
    if (u.accepted) EXPECT_GE(u.candidate_score, u.incumbent_score);
  }
  for (const auto& s : ledger.signals()) EXPECT_LE(s.token_count, 100u);
}

TEST(RunTextGrad, SameSeedSameLedger) {
  auto backend = make_pipeline_world({});
  auto g = build_code_pipeline(1);
  auto train = gen_code_tasks(2, 1);
  auto val = gen_code_tasks(2, 2);
  RunLedger a, b;
  run_textgrad(g, train, val, backend, TextGradConfig{3, std::nullopt, 0}, 11, a);
  run_textgrad(g, train, val, backend, TextGradConfig{3, std::nullopt, 1}, 11, b);
  EXPECT_EQ(a.to_jsonl(), b.to_jsonl());
}
