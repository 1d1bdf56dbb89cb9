#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support/test_support.hpp"
#include "tep/error.hpp"
#include "tep/metrics.hpp"
#include "tep/graph.hpp"
#include "tep/tasks.hpp"

using namespace tep;

namespace {

NodeSpec spec(std::string id, std::vector<std::string> parents = {},
              NodeKind kind = NodeKind::Stochastic) {
  NodeSpec s;
  s.id = id;
  s.kind = kind;
  s.parents = std::move(parents);
  s.params.actor_prompt = id;
  return s;
}

SCGraph chain3() { return build_graph({spec("A"), spec("B", {"A"}), spec("C", {"B"})}, {"C"}); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Io;
}

}  // namespace

TEST(BuildGraph, LinearChainKeepsTopologicalOrder) {
  auto g = chain3();
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g.node(0).id, "A");
  EXPECT_EQ(g.node(1).id, "B");
  EXPECT_EQ(g.node(2).id, "C");
  EXPECT_TRUE(g.is_sink(2));
  EXPECT_FALSE(g.is_sink(0));
  EXPECT_EQ(g.child_indices(0), std::vector<std::size_t>{1});
}

TEST(BuildGraph, ForwardReferenceIsUnknownParent) {
  EXPECT_EQ(code_of([] { build_graph({spec("A"), spec("B", {"C"}), spec("C", {"A"})}, {"C"}); }),
            ErrorCode::UnknownParent);
}

TEST(BuildGraph, TwoCycleDetected) {
  EXPECT_EQ(code_of([] { build_graph({spec("A", {"B"}), spec("B", {"A"})}, {"B"}); }),
            ErrorCode::CycleDetected);
}

TEST(BuildGraph, StructuralErrors) {
  EXPECT_EQ(code_of([] { build_graph({}, {}); }), ErrorCode::EmptyGraph);
  EXPECT_EQ(code_of([] { build_graph({spec("A"), spec("A")}, {"A"}); }), ErrorCode::DuplicateNode);
  EXPECT_EQ(code_of([] { build_graph({spec("A"), spec("B", {"Z"})}, {"B"}); }),
            ErrorCode::UnknownParent);
  EXPECT_EQ(code_of([] { build_graph({spec("A")}, {}); }), ErrorCode::NoSink);
  EXPECT_EQ(code_of([] { build_graph({spec("A")}, {"Q"}); }), ErrorCode::NoSink);
}

TEST(Execute, IdentityBackendPropagatesInput) {
  auto g = chain3();
  auto backend = fixtures::identity_backend();
  auto trace = execute(g, TaskInstance{"x", "", {}}, *backend, 1);
  for (const auto& out : trace.outputs) EXPECT_EQ(out.text, "x") << out.node_id;
}

TEST(Execute, AppendingBackendComposesHops) {
  auto g = chain3();
  auto backend = fixtures::append_id_backend();
  auto trace = execute(g, TaskInstance{"q", "", {}}, *backend, 1);
  EXPECT_EQ(trace.at(g, "C").text, "q|A|B|C");
}

TEST(Execute, ContextLimitRaisesWithNodeId) {
  auto g = build_graph({spec("A")}, {"A"});
  auto backend = fixtures::identity_backend(10);
  // "[Task]" + 10 words + system "A" = 12 tokens.
  TaskInstance task{"w w w w w w w w w w", "", {}};
  try {
    execute(g, task, *backend, 0);
    FAIL() << "expected overflow";
  } catch (const ContextOverflowError& e) {
    EXPECT_EQ(e.requested_tokens(), 12u);
    EXPECT_EQ(e.limit_tokens(), 10u);
    EXPECT_EQ(e.node_id(), "A");
  }
  EXPECT_EQ(backend->calls(), 0u);
}

TEST(Execute, BackendFailureCarriesNodeId) {
  ScriptedBehavior b;
  b.error_probability = 1.0;
  auto backend = std::make_shared<ScriptedBackend>(b);
  auto g = chain3();
  try {
    execute(g, TaskInstance{"x", "", {}}, *backend, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BackendFailure);
    EXPECT_EQ(e.node_id(), "A");
  }
}

TEST(Execute, DeterministicForSameSeed) {
  auto g = build_code_pipeline(3);
  ScriptedBehavior b;
  b.fallback.respond = [](const CompletionRequest& r) {
    return "out " + std::to_string(r.seed) + " " + std::to_string(script::request_uniform(r));
  };
  auto backend = std::make_shared<ScriptedBackend>(b);
  TaskInstance task{"write a parser", "", {}};
  auto a = execute(g, task, *backend, 42);
  auto c = execute(g, task, *backend, 42);
  EXPECT_EQ(a.outputs, c.outputs);
  auto d = execute(g, task, *backend, 43);
  EXPECT_NE(a.outputs, d.outputs);
}

TEST(Execute, ParentsEvaluatedBeforeChildren) {
  // Diamond with fan-in: every response embeds its input, so a child that ran
  // before its parent would see an empty parent section.
  auto g = build_graph({spec("A"), spec("B", {"A"}), spec("C", {"A"}), spec("D", {"C", "B"})},
                       {"D"});
  auto backend = fixtures::append_id_backend();
  auto trace = execute(g, TaskInstance{"q", "", {}}, *backend, 0);
  const auto input = compose_node_input(g, 3, {"q", "", {}}, trace.outputs);
  EXPECT_EQ(input, "[Parent C]\nq|A|C\n[Parent B]\nq|A|B\n");
}

TEST(Execute, RngDrawsEqualStochasticNodeCount) {
  for (int shape = 0; shape < 4; ++shape) {
    std::vector<NodeSpec> specs;
    int stochastic = 0;
    for (int i = 0; i < 3 + shape * 2; ++i) {
      auto kind = (i + shape) % 3 == 0 ? NodeKind::Deterministic : NodeKind::Stochastic;
      stochastic += kind == NodeKind::Stochastic;
      std::vector<std::string> parents;
      if (i > 0) parents.push_back("n" + std::to_string(i - 1));
      if (i > 1 && shape % 2) parents.push_back("n" + std::to_string(i - 2));
      specs.push_back(spec("n" + std::to_string(i), parents, kind));
    }
    auto last = specs.back().id;
    auto g = build_graph(specs, {last});
    auto backend = fixtures::identity_backend();
    auto trace = execute(g, TaskInstance{"x", "", {}}, *backend, 9);
    int draws = 0;
    for (const auto& o : trace.outputs) draws += o.rng_draws;
    EXPECT_EQ(draws, stochastic) << "shape " << shape;
  }
}

TEST(Execute, DeterministicNodesRunColdWithoutSeed) {
  NodeSpec det = spec("D", {}, NodeKind::Deterministic);
  auto req = node_request(det, det.params, "[Task]\nx", 77);
  EXPECT_EQ(req.temperature, 0.0);
  EXPECT_EQ(req.seed, 0u);
  NodeSpec sto = spec("S");
  sto.params.temperature = 0.4;
  req = node_request(sto, sto.params, "[Task]\nx", 77);
  EXPECT_EQ(req.temperature, 0.4);
  EXPECT_EQ(req.seed, 77u);
}

TEST(ReplicateWithScale, ScaleThreeGivesTwelveNodes) {
  EXPECT_EQ(build_code_pipeline(3).size(), 12u);
}

TEST(ReplicateWithScale, ScaleOneIsIdentity) {
  auto g = chain3();
  auto r = replicate_with_scale(g, 1);
  ASSERT_EQ(r.size(), g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(r.node(i).id, g.node(i).id);
    EXPECT_EQ(r.node(i).parents, g.node(i).parents);
    EXPECT_EQ(r.node(i).params, g.node(i).params);
  }
  EXPECT_EQ(r.sinks(), g.sinks());
}

TEST(ReplicateWithScale, ScaleTwoOnChainInsertsPrimedNodes) {
  auto g = build_graph({spec("A"), spec("B", {"A"})}, {"B"});
  auto r = replicate_with_scale(g, 2);
  ASSERT_EQ(r.size(), 4u);
  std::vector<std::string> ids;
  for (const auto& n : r.nodes()) ids.push_back(n.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"A", "A_r1", "B", "B_r1"}));
  EXPECT_EQ(r.node(1).parents, std::vector<std::string>{"A"});
  EXPECT_EQ(r.node(2).parents, std::vector<std::string>{"A_r1"});
  EXPECT_EQ(r.node(3).parents, std::vector<std::string>{"B"});
  EXPECT_EQ(r.sinks(), std::vector<std::string>{"B_r1"});
  EXPECT_NE(r.node(1).role_description.find("refinement"), std::string::npos);
  EXPECT_EQ(r.node(1).params.critic_prompt, r.node(0).params.critic_prompt);
}

TEST(ReplicateWithScale, ScaleLawHoldsUpToTen) {
  for (int s = 1; s <= 10; ++s) EXPECT_EQ(build_code_pipeline(s).size(), 4u * s) << s;
}

TEST(ReplicateWithScale, RejectsNonPositiveScale) {
  auto g = chain3();
  EXPECT_EQ(code_of([&] { replicate_with_scale(g, 0); }), ErrorCode::InvalidScale);
}
