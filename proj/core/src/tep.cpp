#include "tep/tep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tep/error.hpp"
#include "tep/metrics.hpp"
#include "tep/parallel.hpp"
#include "tep/prompts.hpp"
#include "tep/text.hpp"
#include "tep/validation.hpp"

namespace tep {

double sample_temperature(Rng& rng) { return uniform_real(rng, kMinTemperature, kMaxTemperature); }

double adapt_temperature(double temperature, bool improved) {
  return improved ? std::max(kMinTemperature, temperature * 0.95)
                  : std::min(kMaxTemperature, temperature * 1.05);
}

NodeInput node_input(const SCGraph& graph, std::size_t index, const TaskInstance& task,
                     const ExecutionTrace& execution) {
  NodeInput in;
  in.user_text = compose_node_input(graph, index, task, execution.outputs);
  for (std::size_t p : graph.parent_indices(index)) in.parents.push_back(execution.outputs[p]);
  const NodeSpec& node = graph.node(index);
  in.task_schema = fmt::format(
      "Stage role: {}\nThe output is consumed by the next stage as-is; the final stage must state "
      "the answer to the task.",
      node.role_description);
  return in;
}

namespace {

PhaseResult run_phase(const NodeSpec& node, const NodeParams& params, std::string_view system_text,
                      const NodeInput& input, Backend& backend, const TepConfig& config,
                      std::uint64_t seed, int cap) {
  Rng rng(seed);
  NodeParams acting = params;
  acting.actor_prompt = std::string(system_text);

  PhaseResult r;
  r.equilibrium_output.node_id = node.id;
  auto produce = [&](std::string user) {
    const std::uint64_t draw = rng();
    if (node.kind == NodeKind::Stochastic) r.equilibrium_output.rng_draws += 1;
    return backend.complete(node_request(node, acting, std::move(user), draw)).text;
  };
  auto critique = [&](const std::string& out) {
    NodeOutput probe{node.id, out, token_count(out), 0};
    auto req = build_critic_request(probe, input.parents, input.task_schema, params.critic_prompt,
                                    {config.parent_budget_tokens});
    req.seed = rng();
    return parse_critic_response(backend.complete(req).text);
  };

  std::string output = produce(input.user_text);
  auto& eq = r.equilibrium;
  for (;;) {
    r.last_scores = critique(output);
    eq.score_history.push_back(r.last_scores.overall_score);
    if (eq.score_history.size() == 1 &&
        should_skip_refinement(r.last_scores, config.skip_threshold)) {
      eq.status = EquilibriumStatus::EarlySkip;
      break;
    }
    if (detect_equilibrium(eq.score_history, config.equilibrium_window,
                           config.equilibrium_epsilon)) {
      eq.status = EquilibriumStatus::Converged;
      break;
    }
    if (!is_substantive(r.last_scores.actionable_feedback, config.keywords)) {
      eq.status = EquilibriumStatus::NonSubstantive;
      break;
    }
    if (eq.iterations_used >= cap) {
      eq.status = EquilibriumStatus::BudgetExhausted;
      break;
    }
    output = produce(input.user_text + text::section(sections::kPreviousOutput, output) +
                     text::section(sections::kCriticFeedback, r.last_scores.actionable_feedback) +
                     text::section(sections::kInstruction, prompts::kRefineInstruction));
    ++eq.iterations_used;
  }

  r.equilibrium_output.token_count = token_count(output);
  r.equilibrium_output.text = std::move(output);
  r.final_feedback =
      make_signal(r.last_scores.actionable_feedback, {node.id}, initial_specificity(backend), 0);
  return r;
}

}  // namespace

PhaseResult free_phase(const NodeSpec& node, const NodeParams& params, const NodeInput& input,
                       Backend& backend, const TepConfig& config, std::uint64_t seed) {
  return run_phase(node, params, params.actor_prompt, input, backend, config, seed,
                   config.free_iteration_cap);
}

std::string nudged_prompt(std::string_view actor_prompt, std::string_view nudge) {
  if (text::trim(nudge).empty()) return std::string(actor_prompt);
  return fmt::format("{}\n\nNudge: {}", actor_prompt, text::trim(nudge));
}

PhaseResult nudged_phase(const NodeSpec& node, const NodeParams& params, const NodeInput& input,
                         std::string_view nudge, Backend& backend, const TepConfig& config,
                         std::uint64_t seed) {
  return run_phase(node, params, nudged_prompt(params.actor_prompt, nudge), input, backend, config,
                   seed, config.nudged_iteration_cap);
}

std::string forward_signal(const TaskInstance& task, const NodeSpec& node,
                           const NodeOutput& equilibrium_output) {
  return text::section(sections::kTaskTarget, task.target) +
         text::section(sections::kNodeRole, node.role_description) +
         text::section(sections::kEquilibriumOutput, equilibrium_output.text);
}

Nudge generate_nudge(std::string_view local_objective, double beta, std::size_t edit_budget_tokens,
                     Backend& backend, std::uint64_t seed) {
  Nudge n;
  const double scaled = static_cast<double>(edit_budget_tokens) * std::max(0.0, beta);
  n.budget_tokens = static_cast<std::size_t>(std::floor(scaled));
  if (n.budget_tokens == 0) return n;

  CompletionRequest req;
  req.system_text = std::string(prompts::kNudgeGenerator);
  req.user_text = std::string(local_objective) +
                  text::section(sections::kEditBudget, fmt::format("{} words", n.budget_tokens));
  req.seed = seed;
  n.text = std::string(text::trim(backend.complete(req).text));
  if (token_count(n.text) > n.budget_tokens) {
    spdlog::warn("nudge of {} tokens exceeds edit budget {}; truncating", token_count(n.text),
                 n.budget_tokens);
    n.text = std::string(truncate_tokens(n.text, n.budget_tokens));
    n.truncated = true;
  }
  return n;
}

UpdateDecision gate_candidate(const NodeParams& incumbent, std::optional<NodeParams> candidate,
                              const ValidationGate& gate) {
  UpdateDecision d;
  d.params = incumbent;
  d.incumbent_score = gate.incumbent_score;
  d.candidate = std::move(candidate);
  if (!d.candidate) {
    d.malformed = true;
    return d;
  }
  d.candidate_score = gate.score_candidate(*d.candidate);
  d.accepted = d.candidate_score >= d.incumbent_score;
  if (d.accepted) d.params = *d.candidate;
  return d;
}

UpdateDecision local_update(const NodeSpec& node, const FeedbackSignal& free_feedback,
                            const FeedbackSignal& nudged_feedback, const NodeParams& params,
                            Backend& backend, const ValidationGate& gate, std::uint64_t seed) {
  for (const auto* g : {&free_feedback, &nudged_feedback}) {
    if (g->provenance != std::set<std::string>{node.id}) {
      throw Error(ErrorCode::InvalidRequest,
                  fmt::format("feedback for '{}' is not strictly local", node.id), node.id);
    }
  }
  CompletionRequest req;
  req.system_text = std::string(prompts::kUpdateOperator);
  req.user_text = text::section(sections::kNodeRole, node.role_description) +
                  text::section(sections::kCurrentPrompt, params.actor_prompt) +
                  text::section(sections::kFreeFeedback, free_feedback.text) +
                  text::section(sections::kNudgedFeedback, nudged_feedback.text);
  if (free_feedback.specificity || nudged_feedback.specificity) {
    const double s = std::min(free_feedback.specificity.value_or(1.0),
                              nudged_feedback.specificity.value_or(1.0));
    req.user_text += text::section(sections::kFeedbackSpecificity, fmt::format("{:.6f}", s));
  }
  req.seed = seed;

  std::optional<NodeParams> candidate;
  try {
    NodeParams next = params;
    next.actor_prompt = extract_prompt(backend.complete(req).text);
    candidate = std::move(next);
  } catch (const ContextOverflowError& e) {
    if (!e.node_id().empty()) throw;
    throw ContextOverflowError(e.requested_tokens(), e.limit_tokens(), node.id);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::MalformedUpdate) throw;
    spdlog::warn("malformed update for node {}: {}", node.id, e.detail());
  }
  return gate_candidate(params, std::move(candidate), gate);
}

namespace {

std::uint64_t phase_key(const NodeParams& params, std::string_view system_text,
                        const NodeInput& input, std::uint64_t seed) {
  std::uint64_t h = fnv1a64(system_text);
  h = fnv1a64(input.user_text, h);
  h = fnv1a64(params.critic_prompt, h);
  h = fnv1a64(input.task_schema, h);
  return derive_seed(h, std::bit_cast<std::uint64_t>(params.temperature), seed);
}

struct NodeStep {
  std::optional<PhaseResult> result;
  bool cached = false;
  std::optional<ContextOverflowError> overflow;
  std::string error;

  bool ok() const { return result.has_value(); }
};

template <typename Fn>
void guarded(NodeStep& step, Fn&& fn) {
  try {
    fn();
  } catch (const ContextOverflowError& e) {
    step.overflow = e;
  } catch (const std::exception& e) {
    step.error = e.what();
  }
}

void record_step(RunLedger& ledger, int t, const std::string& id, const char* phase,
                 const NodeStep& step) {
  if (step.overflow) {
    ledger.record(OverflowRecord{t, id, phase, step.overflow->requested_tokens(),
                                 step.overflow->limit_tokens()});
    return;
  }
  if (!step.error.empty()) {
    ledger.record(FailureRecord{t, id, phase, step.error});
    return;
  }
  if (!step.result) return;
  const auto& r = *step.result;
  ledger.record(PhaseRecord{t, id, phase, std::string(to_string(r.equilibrium.status)),
                            r.equilibrium.iterations_used, r.equilibrium.score_history,
                            r.final_feedback.token_count, r.final_feedback.provenance.size(),
                            step.cached});
  ledger.record(SignalRecord{t, id, r.final_feedback.hop_distance, r.final_feedback.token_count,
                             r.final_feedback.provenance.size(), r.final_feedback.specificity,
                             false});
}

}  // namespace

TepResult run_tep(const SCGraph& graph, std::span<const TaskInstance> train,
                  std::span<const TaskInstance> validation, BackendHandle backend,
                  const TepConfig& config, std::uint64_t seed, RunLedger& ledger) {
  if (train.empty()) throw Error(ErrorCode::RangeError, "no training tasks");
  if (!(config.beta > 0.0)) throw Error(ErrorCode::RangeError, "beta must be positive");
  const std::size_t n = graph.size();

  TepResult result;
  result.params = graph.params();
  Rng temp_rng(derive_seed(seed, 0x7e3bULL));
  for (auto& p : result.params) p.temperature = sample_temperature(temp_rng);

  PipelineValidator validator(graph, {validation.begin(), validation.end()}, backend,
                              derive_seed(seed, 0x7a11dULL));
  double incumbent = validator.score(result.params);

  std::vector<std::optional<std::pair<std::uint64_t, PhaseResult>>> cache(n);
  std::vector<std::uint64_t> phase_seeds(n);
  for (std::size_t i = 0; i < n; ++i) phase_seeds[i] = derive_seed(seed, 0xf4a5eULL, i);

  Rng rng(seed);
  double beta = config.beta;
  std::optional<double> previous_j;

  for (int t = 0; t < config.t_max; ++t) {
    const auto task_index =
        static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(train.size()) - 1));
    const TaskInstance& task = train[task_index];
    const std::uint64_t exec_seed = derive_seed(seed, static_cast<std::uint64_t>(t), 0xe8ecULL);
    result.betas.push_back(beta);

    std::vector<bool> accepted(n, false);
    try {
      const auto trace = execute(graph, result.params, task, *backend, exec_seed);
      std::vector<NodeInput> inputs(n);
      for (std::size_t i = 0; i < n; ++i) inputs[i] = node_input(graph, i, task, trace);

      // Free phases.
      std::vector<NodeStep> free(n);
      parallel_for(
          n,
          [&](std::size_t i) {
            guarded(free[i], [&] {
              const auto& p = result.params[i];
              const auto key = phase_key(p, p.actor_prompt, inputs[i], phase_seeds[i]);
              if (config.cache_equilibria && cache[i] && cache[i]->first == key) {
                free[i].result = cache[i]->second;
                free[i].cached = true;
                return;
              }
              free[i].result = free_phase(graph.node(i), p, inputs[i], *backend, config, phase_seeds[i]);
              if (config.cache_equilibria) cache[i].emplace(key, *free[i].result);
            });
          },
          config.max_threads);
      for (std::size_t i = 0; i < n; ++i) record_step(ledger, t, graph.node(i).id, "free", free[i]);

      // Forward signals, nudges and nudged phases.
      std::vector<Nudge> nudges(n);
      std::vector<std::size_t> objective_tokens(n, 0);
      std::vector<NodeStep> nudged(n);
      parallel_for(
          n,
          [&](std::size_t i) {
            if (!free[i].ok()) return;
            guarded(nudged[i], [&] {
              const auto objective =
                  forward_signal(task, graph.node(i), free[i].result->equilibrium_output);
              objective_tokens[i] = token_count(objective);
              nudges[i] = generate_nudge(objective, beta, config.edit_budget_tokens, *backend,
                                         derive_seed(seed, static_cast<std::uint64_t>(t), i, 0x6e0ULL));
              nudged[i].result = nudged_phase(graph.node(i), result.params[i], inputs[i],
                                              nudges[i].text, *backend, config, phase_seeds[i]);
            });
          },
          config.max_threads);
      for (std::size_t i = 0; i < n; ++i) {
        if (!free[i].ok()) continue;
        if (nudged[i].ok()) {
          ledger.record(NudgeRecord{t, graph.node(i).id, beta, nudges[i].budget_tokens,
                                    token_count(nudges[i].text), objective_tokens[i],
                                    nudges[i].truncated});
        }
        record_step(ledger, t, graph.node(i).id, "nudged", nudged[i]);
      }

      // Local updates behind the validation gate.
      std::vector<std::optional<UpdateDecision>> decisions(n);
      std::vector<NodeStep> updates(n);
      parallel_for(
          n,
          [&](std::size_t i) {
            if (!nudged[i].ok()) return;
            guarded(updates[i], [&] {
              ValidationGate gate{[&](const NodeParams& c) {
                                    return validator.score_with(result.params, i, c);
                                  },
                                  incumbent};
              decisions[i] = local_update(graph.node(i), free[i].result->final_feedback,
                                          nudged[i].result->final_feedback, result.params[i],
                                          *backend, gate,
                                          derive_seed(seed, static_cast<std::uint64_t>(t), i, 0x0bdULL));
            });
          },
          config.max_threads);

      auto next = result.params;
      for (std::size_t i = 0; i < n; ++i) {
        if (updates[i].overflow || !updates[i].error.empty()) {
          record_step(ledger, t, graph.node(i).id, "update", updates[i]);
          continue;
        }
        if (!decisions[i]) continue;
        const auto& d = *decisions[i];
        accepted[i] = d.accepted;
        next[i] = d.params;
        next[i].temperature = adapt_temperature(result.params[i].temperature, d.accepted);
        if (d.malformed) ledger.record(FailureRecord{t, graph.node(i).id, "update", "malformed update"});
        ledger.record(UpdateRecord{t, graph.node(i).id, d.accepted, d.candidate_score,
                                   d.incumbent_score, next[i].temperature});
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!decisions[i] && !updates[i].overflow && updates[i].error.empty()) {
          next[i].temperature = adapt_temperature(result.params[i].temperature, false);
        }
      }
      result.params = std::move(next);
    } catch (const ContextOverflowError& e) {
      ledger.record(OverflowRecord{t, e.node_id(), "execute", e.requested_tokens(), e.limit_tokens()});
      for (auto& p : result.params) p.temperature = adapt_temperature(p.temperature, false);
    } catch (const Error& e) {
      ledger.record(FailureRecord{t, e.node_id(), "execute", e.what()});
      for (auto& p : result.params) p.temperature = adapt_temperature(p.temperature, false);
    }

    incumbent = validator.score(result.params);
    const double j = 1.0 - incumbent;
    result.objective.push_back(j);
    result.iterations = t + 1;

    IterationRecord it;
    it.iteration = t;
    it.task_index = task_index;
    it.seed = exec_seed;
    it.objective = j;
    it.beta = beta;
    for (std::size_t i = 0; i < n; ++i) {
      it.temperatures.emplace_back(graph.node(i).id, result.params[i].temperature);
    }
    ledger.record(std::move(it));

    if (previous_j && std::abs(j - *previous_j) < config.epsilon) break;
    previous_j = j;
    beta *= config.beta_decay;
  }
  result.final_beta = beta;
  return result;
}

}  // namespace tep
