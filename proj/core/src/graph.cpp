#include "tep/graph.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <unordered_set>

#include "tep/error.hpp"
#include "tep/metrics.hpp"
#include "tep/random.hpp"
#include "tep/text.hpp"

namespace tep {

std::string_view to_string(NodeKind kind) noexcept {
  return kind == NodeKind::Deterministic ? "deterministic" : "stochastic";
}

std::optional<std::size_t> SCGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool SCGraph::is_sink(std::size_t index) const { return sink_flags_.at(index); }

std::vector<NodeParams> SCGraph::params() const {
  std::vector<NodeParams> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.params);
  return out;
}

namespace {

// Finds a cycle among declared nodes regardless of declaration order.
bool has_cycle(const std::vector<NodeSpec>& specs,
               const std::unordered_map<std::string, std::size_t>& index) {
  enum class Mark { White, Grey, Black };
  std::vector<Mark> mark(specs.size(), Mark::White);
  // Iterative DFS over parent edges.
  for (std::size_t root = 0; root < specs.size(); ++root) {
    if (mark[root] != Mark::White) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    mark[root] = Mark::Grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next == specs[v].parents.size()) {
        mark[v] = Mark::Black;
        stack.pop_back();
        continue;
      }
      const std::size_t u = index.at(specs[v].parents[next++]);
      if (mark[u] == Mark::Grey) return true;
      if (mark[u] == Mark::White) {
        mark[u] = Mark::Grey;
        stack.emplace_back(u, 0);
      }
    }
  }
  return false;
}

}  // namespace

SCGraph build_graph(std::vector<NodeSpec> specs, std::vector<std::string> sinks) {
  if (specs.empty()) throw Error(ErrorCode::EmptyGraph, "graph has no nodes");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!index.emplace(specs[i].id, i).second) {
      throw Error(ErrorCode::DuplicateNode, fmt::format("node '{}' declared twice", specs[i].id),
                  specs[i].id);
    }
  }
  for (const auto& spec : specs) {
    for (const auto& p : spec.parents) {
      if (!index.contains(p)) {
        throw Error(ErrorCode::UnknownParent,
                    fmt::format("node '{}' lists undeclared parent '{}'", spec.id, p), spec.id);
      }
    }
  }
  if (has_cycle(specs, index)) throw Error(ErrorCode::CycleDetected, "graph contains a cycle");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (const auto& p : specs[i].parents) {
      if (index.at(p) >= i) {
        throw Error(ErrorCode::UnknownParent,
                    fmt::format("node '{}' references parent '{}' before its declaration",
                                specs[i].id, p),
                    specs[i].id);
      }
    }
  }
  if (sinks.empty()) throw Error(ErrorCode::NoSink, "graph declares no sink");

  SCGraph g;
  g.sink_flags_.assign(specs.size(), false);
  for (const auto& s : sinks) {
    auto it = index.find(s);
    if (it == index.end()) throw Error(ErrorCode::NoSink, fmt::format("unknown sink '{}'", s));
    g.sink_flags_[it->second] = true;
  }
  g.parents_.resize(specs.size());
  g.children_.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (const auto& p : specs[i].parents) {
      const std::size_t pi = index.at(p);
      g.parents_[i].push_back(pi);
      g.children_[pi].push_back(i);
    }
  }
  g.nodes_ = std::move(specs);
  g.sinks_ = std::move(sinks);
  g.index_ = std::move(index);
  return g;
}

const NodeOutput& ExecutionTrace::at(const SCGraph& graph, std::string_view id) const {
  auto idx = graph.index_of(id);
  if (!idx) throw Error(ErrorCode::UnknownParent, fmt::format("no node '{}'", id));
  return outputs.at(*idx);
}

std::map<std::string, NodeOutput> ExecutionTrace::by_id() const {
  std::map<std::string, NodeOutput> out;
  for (const auto& o : outputs) out.emplace(o.node_id, o);
  return out;
}

std::string compose_node_input(const SCGraph& graph, std::size_t index, const TaskInstance& task,
                               std::span<const NodeOutput> outputs) {
  const auto& parents = graph.parent_indices(index);
  if (parents.empty()) return text::section("Task", task.input);
  std::string user;
  for (std::size_t p : parents) {
    user += text::section("Parent " + graph.node(p).id, outputs[p].text);
  }
  return user;
}

CompletionRequest node_request(const NodeSpec& node, const NodeParams& params,
                               std::string user_text, std::uint64_t draw) {
  CompletionRequest req;
  req.system_text = params.actor_prompt;
  req.user_text = std::move(user_text);
  if (node.kind == NodeKind::Stochastic) {
    req.temperature = params.temperature;
    req.seed = draw;
  }
  return req;
}

namespace {

[[noreturn]] void rethrow_for_node(const std::string& id) {
  try {
    throw;
  } catch (const ContextOverflowError& e) {
    if (!e.node_id().empty()) throw;
    throw ContextOverflowError(e.requested_tokens(), e.limit_tokens(), id);
  } catch (const Error& e) {
    if (!e.node_id().empty()) throw;
    throw Error(e.code(), e.detail(), id);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::BackendFailure, e.what(), id);
  }
}

}  // namespace

ExecutionTrace execute(const SCGraph& graph, std::span<const NodeParams> params,
                       const TaskInstance& task, Backend& backend, std::uint64_t seed) {
  if (params.size() != graph.size()) {
    throw Error(ErrorCode::InvalidRequest,
                fmt::format("{} parameter sets for {} nodes", params.size(), graph.size()));
  }
  Rng rng(seed);
  ExecutionTrace trace;
  trace.outputs.resize(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const NodeSpec& node = graph.node(i);
    NodeOutput& out = trace.outputs[i];
    out.node_id = node.id;
    std::uint64_t draw = 0;
    if (node.kind == NodeKind::Stochastic) {
      draw = rng();
      out.rng_draws = 1;
    }
    try {
      auto req = node_request(node, params[i], compose_node_input(graph, i, task, trace.outputs),
                              draw);
      out.text = backend.complete(req).text;
    } catch (...) {
      rethrow_for_node(node.id);
    }
    out.token_count = token_count(out.text);
  }
  return trace;
}

ExecutionTrace execute(const SCGraph& graph, const TaskInstance& task, Backend& backend,
                       std::uint64_t seed) {
  const auto params = graph.params();
  return execute(graph, params, task, backend, seed);
}

namespace {

constexpr std::array<std::string_view, 3> kRefinementRoles{
    "reformatting", "documentation enhancement", "style consistency"};

std::string with_role_line(std::string_view prompt, std::string_view role) {
  const std::string line = fmt::format("Role: {}", role);
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    const std::size_t end = std::min(prompt.find('\n', pos), prompt.size());
    if (prompt.substr(pos, end - pos).starts_with("Role:")) {
      return fmt::format("{}{}{}", prompt.substr(0, pos), line, prompt.substr(end));
    }
    if (end == prompt.size()) break;
    pos = end + 1;
  }
  return prompt.empty() ? line : fmt::format("{}\n{}", line, prompt);
}

}  // namespace

SCGraph replicate_with_scale(const SCGraph& graph, int s) {
  if (s < 1) throw Error(ErrorCode::InvalidScale, fmt::format("scale must be >= 1, got {}", s));
  if (s == 1) return graph;

  auto last_id = [s](const std::string& id) { return fmt::format("{}_r{}", id, s - 1); };

  std::vector<NodeSpec> specs;
  specs.reserve(graph.size() * static_cast<std::size_t>(s));
  for (const auto& node : graph.nodes()) {
    NodeSpec original = node;
    for (auto& p : original.parents) p = last_id(p);
    specs.push_back(std::move(original));
    for (int j = 1; j < s; ++j) {
      NodeSpec replica = node;
      replica.id = fmt::format("{}_r{}", node.id, j);
      replica.parents = {j == 1 ? node.id : fmt::format("{}_r{}", node.id, j - 1)};
      const auto kind = kRefinementRoles[static_cast<std::size_t>(j - 1) % kRefinementRoles.size()];
      replica.role_description =
          fmt::format("{} refinement of the {} output, preserving its semantics", kind, node.id);
      replica.params.actor_prompt =
          with_role_line(node.params.actor_prompt, replica.role_description);
      specs.push_back(std::move(replica));
    }
  }
  std::vector<std::string> sinks;
  for (const auto& sink : graph.sinks()) sinks.push_back(last_id(sink));
  return build_graph(std::move(specs), std::move(sinks));
}

}  // namespace tep
