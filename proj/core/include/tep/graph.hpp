#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tep/backend.hpp"

namespace tep {

enum class NodeKind { Deterministic, Stochastic };

std::string_view to_string(NodeKind kind) noexcept;

struct NodeParams {
  std::string actor_prompt;
  std::string critic_prompt;
  double temperature = 0.6;

  friend bool operator==(const NodeParams&, const NodeParams&) = default;
};

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Stochastic;
  std::vector<std::string> parents;
  NodeParams params;
  std::string role_description;
};

/// Validated, immutable DAG. Nodes are stored in declaration order, which is
/// a topological order.
class SCGraph {
 public:
  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& sinks() const noexcept { return sinks_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  const NodeSpec& node(std::size_t index) const { return nodes_.at(index); }
  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Indices of the parents / children of node `index`, in declared parent
  /// order and in topological order respectively.
  const std::vector<std::size_t>& parent_indices(std::size_t index) const {
    return parents_.at(index);
  }
  const std::vector<std::size_t>& child_indices(std::size_t index) const {
    return children_.at(index);
  }
  bool is_sink(std::size_t index) const;
  std::vector<NodeParams> params() const;

 private:
  friend SCGraph build_graph(std::vector<NodeSpec>, std::vector<std::string>);

  std::vector<NodeSpec> nodes_;
  std::vector<std::string> sinks_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<bool> sink_flags_;
};

/// Validates `specs` and returns the graph. Throws Error with CycleDetected,
/// UnknownParent (including references to later declarations), DuplicateNode,
/// EmptyGraph or NoSink.
SCGraph build_graph(std::vector<NodeSpec> specs, std::vector<std::string> sinks);

struct TaskInstance {
  std::string input;
  std::string target;
  std::map<std::string, std::string> metadata;
};

struct NodeOutput {
  std::string node_id;
  std::string text;
  std::size_t token_count = 0;
  int rng_draws = 0;

  friend bool operator==(const NodeOutput&, const NodeOutput&) = default;
};

/// Outputs indexed like graph.nodes().
struct ExecutionTrace {
  std::vector<NodeOutput> outputs;

  const NodeOutput& at(const SCGraph& graph, std::string_view id) const;
  std::map<std::string, NodeOutput> by_id() const;
};

/// User text for node `index` given its parents' outputs: a "[Task]" section
/// for source nodes, otherwise one "[Parent <id>]" section per parent in
/// declared order.
std::string compose_node_input(const SCGraph& graph, std::size_t index, const TaskInstance& task,
                               std::span<const NodeOutput> outputs);

/// Completion request for node `index`. Stochastic nodes use the node
/// temperature and `draw` as the request seed; deterministic nodes run at
/// temperature 0 with seed 0.
CompletionRequest node_request(const NodeSpec& node, const NodeParams& params,
                               std::string user_text, std::uint64_t draw);

/// Evaluates every node once in topological order. Each stochastic node
/// consumes exactly one draw from a stream seeded by `seed`; deterministic
/// nodes consume none. Errors are rethrown with the failing node's id.
ExecutionTrace execute(const SCGraph& graph, std::span<const NodeParams> params,
                       const TaskInstance& task, Backend& backend, std::uint64_t seed);
ExecutionTrace execute(const SCGraph& graph, const TaskInstance& task, Backend& backend,
                       std::uint64_t seed);

/// Inserts s-1 refinement replicas after every node of a linear pipeline.
/// Replica j of node v is "<v>_r<j>"; its only parent is its predecessor in
/// the chain, and consumers of v read from its last replica. Throws
/// Error(InvalidScale) for s < 1.
SCGraph replicate_with_scale(const SCGraph& graph, int s);

}  // namespace tep
