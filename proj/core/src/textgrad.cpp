#include "tep/textgrad.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tep/error.hpp"
#include "tep/metrics.hpp"
#include "tep/parallel.hpp"
#include "tep/prompts.hpp"
#include "tep/random.hpp"
#include "tep/text.hpp"
#include "tep/validation.hpp"

namespace tep {

FeedbackSignal make_signal(std::string text, std::set<std::string> provenance,
                           std::optional<double> specificity, int hop_distance) {
  FeedbackSignal g;
  g.token_count = token_count(text);
  g.text = std::move(text);
  g.provenance = std::move(provenance);
  g.specificity = specificity;
  g.hop_distance = hop_distance;
  return g;
}

std::optional<double> initial_specificity(const Backend& backend) {
  if (backend.specificity_decay()) return 1.0;
  return std::nullopt;
}

namespace {

[[noreturn]] void rethrow_overflow_for(const std::string& id) {
  try {
    throw;
  } catch (const ContextOverflowError& e) {
    if (!e.node_id().empty()) throw;
    throw ContextOverflowError(e.requested_tokens(), e.limit_tokens(), id);
  }
}

}  // namespace

FeedbackSignal critique_node(const NodeSpec& node, const NodeParams& params,
                             const NodeOutput& output, const FeedbackSignal* downstream,
                             std::string_view loss_text, Backend& backend, std::uint64_t seed) {
  CompletionRequest req;
  req.system_text = std::string(prompts::kGradientCritic);
  if (!params.critic_prompt.empty()) req.system_text += "\n" + params.critic_prompt;
  req.user_text = text::section(sections::kNodeRole, node.role_description) +
                  text::section(sections::kNodePrompt, params.actor_prompt) +
                  text::section(sections::kNodeOutput, output.text);
  if (downstream) {
    req.user_text += text::section(sections::kDownstreamFeedback, downstream->text);
  } else {
    req.user_text += text::section(sections::kLoss, loss_text);
  }
  req.seed = seed;

  Completion c;
  try {
    c = backend.complete(req);
  } catch (const ContextOverflowError&) {
    rethrow_overflow_for(node.id);
  }

  std::set<std::string> provenance;
  if (downstream) provenance = downstream->provenance;
  provenance.insert(node.id);
  return make_signal(std::move(c.text), std::move(provenance),
                     downstream ? downstream->specificity : initial_specificity(backend),
                     downstream ? downstream->hop_distance + 1 : 0);
}

FeedbackSignal summarize_feedback(const FeedbackSignal& g, std::size_t cap_tokens, Backend& backend,
                                  std::uint64_t seed) {
  if (cap_tokens == 0) throw Error(ErrorCode::RangeError, "summary cap must be positive");
  if (g.token_count <= cap_tokens) return g;

  CompletionRequest req;
  req.system_text = std::string(prompts::kSummarizer);
  req.user_text = text::section(sections::kWordLimit, std::to_string(cap_tokens)) +
                  text::section(sections::kFeedback, g.text);
  req.seed = seed;
  std::string summary = backend.complete(req).text;
  if (token_count(summary) > cap_tokens) {
    spdlog::warn("summary of {} tokens exceeds cap {}; truncating", token_count(summary), cap_tokens);
    summary = std::string(truncate_tokens(summary, cap_tokens));
  }

  std::optional<double> specificity = g.specificity;
  if (auto decay = backend.specificity_decay()) specificity = specificity.value_or(1.0) * *decay;
  FeedbackSignal out = make_signal(std::move(summary), g.provenance, specificity, g.hop_distance);
  out.summarized = true;
  return out;
}

std::string extract_prompt(std::string_view operator_output) {
  constexpr std::string_view open = "<prompt>";
  constexpr std::string_view close = "</prompt>";
  const auto b = operator_output.find(open);
  const auto e = operator_output.rfind(close);
  if (b == std::string_view::npos || e == std::string_view::npos || e < b + open.size()) {
    throw Error(ErrorCode::MalformedUpdate, "update operator output has no <prompt> block");
  }
  const auto body = text::trim(operator_output.substr(b + open.size(), e - b - open.size()));
  if (body.empty()) throw Error(ErrorCode::MalformedUpdate, "update operator returned an empty prompt");
  return std::string(body);
}

NodeParams propose_update(const NodeSpec& node, const NodeParams& params,
                          const FeedbackSignal& feedback, Backend& backend, std::uint64_t seed) {
  CompletionRequest req;
  req.system_text = std::string(prompts::kUpdateOperator);
  req.user_text = text::section(sections::kNodeRole, node.role_description) +
                  text::section(sections::kCurrentPrompt, params.actor_prompt) +
                  text::section(sections::kFeedback, feedback.text);
  if (feedback.specificity) {
    req.user_text += text::section(sections::kFeedbackSpecificity,
                                   fmt::format("{:.6f}", *feedback.specificity));
  }
  req.seed = seed;
  Completion c;
  try {
    c = backend.complete(req);
  } catch (const ContextOverflowError&) {
    rethrow_overflow_for(node.id);
  }
  NodeParams next = params;
  next.actor_prompt = extract_prompt(c.text);
  return next;
}

namespace {

FeedbackSignal aggregate(std::vector<const FeedbackSignal*> parts) {
  if (parts.size() == 1) return *parts.front();
  std::string joined;
  std::set<std::string> provenance;
  int hop = 0;
  double spec_sum = 0.0;
  int spec_n = 0;
  for (const auto* p : parts) {
    if (!joined.empty()) joined += '\n';
    joined += p->text;
    provenance.insert(p->provenance.begin(), p->provenance.end());
    hop = std::max(hop, p->hop_distance);
    if (p->specificity) {
      spec_sum += *p->specificity;
      ++spec_n;
    }
  }
  std::optional<double> spec;
  if (spec_n > 0) spec = spec_sum / spec_n;
  return make_signal(std::move(joined), std::move(provenance), spec, hop);
}

void record_overflow(RunLedger* ledger, int iteration, const std::string& node, const char* stage,
                     const ContextOverflowError& e) {
  if (!ledger) return;
  ledger->record(OverflowRecord{iteration, node, stage, e.requested_tokens(), e.limit_tokens()});
}

}  // namespace

BackpropResult backprop_update(const SCGraph& graph, std::span<const NodeParams> params,
                               const ExecutionTrace& execution, std::string_view final_loss,
                               Backend& backend, const BackpropOptions& options,
                               RunLedger* ledger) {
  const std::size_t n = graph.size();
  BackpropResult r;
  r.local.resize(n);
  r.transmitted.resize(n);
  r.candidates.resize(n);
  r.attempted.assign(n, false);

  for (std::size_t i = n; i-- > 0;) {
    const NodeSpec& node = graph.node(i);
    const auto& children = graph.child_indices(i);

    std::optional<FeedbackSignal> received;
    if (!children.empty()) {
      std::vector<const FeedbackSignal*> parts;
      for (auto c = children.rbegin(); c != children.rend(); ++c) {
        if (r.transmitted[*c]) parts.push_back(&*r.transmitted[*c]);
      }
      if (parts.empty()) {
        if (ledger) ledger->record(FailureRecord{options.iteration, node.id, "critique", "starved"});
        continue;
      }
      received = aggregate(std::move(parts));
      if (options.summary_cap && received->token_count > *options.summary_cap) {
        try {
          received = summarize_feedback(*received, *options.summary_cap, backend,
                                        derive_seed(options.seed, i, 3));
        } catch (const ContextOverflowError& e) {
          record_overflow(ledger, options.iteration, node.id, "summarize", e);
          continue;
        }
      }
    } else if (!graph.is_sink(i)) {
      continue;  // dead end: no path to a sink
    }

    try {
      r.local[i] = critique_node(node, params[i], execution.outputs[i],
                                 received ? &*received : nullptr, final_loss, backend,
                                 derive_seed(options.seed, i, 1));
    } catch (const ContextOverflowError& e) {
      record_overflow(ledger, options.iteration, node.id, "critique", e);
      continue;
    }

    FeedbackSignal sent = *r.local[i];
    if (options.summary_cap && sent.token_count > *options.summary_cap) {
      try {
        sent = summarize_feedback(sent, *options.summary_cap, backend, derive_seed(options.seed, i, 2));
      } catch (const ContextOverflowError& e) {
        record_overflow(ledger, options.iteration, node.id, "summarize", e);
        continue;
      }
    }
    if (ledger) {
      ledger->record(SignalRecord{options.iteration, node.id, sent.hop_distance, sent.token_count,
                                  sent.provenance.size(), sent.specificity, sent.summarized});
    }
    r.transmitted[i] = std::move(sent);
  }

  struct Outcome {
    std::optional<NodeParams> candidate;
    std::optional<ContextOverflowError> overflow;
    std::string error;
  };
  std::vector<Outcome> outcomes(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        if (!r.local[i]) return;
        try {
          outcomes[i].candidate = propose_update(graph.node(i), params[i], *r.local[i], backend,
                                                 derive_seed(options.seed, i, 4));
        } catch (const ContextOverflowError& e) {
          outcomes[i].overflow = e;
        } catch (const Error& e) {
          outcomes[i].error = e.what();
        }
      },
      options.max_threads);

  for (std::size_t i = 0; i < n; ++i) {
    if (!r.local[i]) continue;
    auto& o = outcomes[i];
    if (o.overflow) {
      record_overflow(ledger, options.iteration, graph.node(i).id, "update", *o.overflow);
      continue;
    }
    r.attempted[i] = true;
    if (!o.error.empty() && ledger) {
      ledger->record(FailureRecord{options.iteration, graph.node(i).id, "update", o.error});
    }
    r.candidates[i] = std::move(o.candidate);
  }
  return r;
}

OptimizationResult run_textgrad(const SCGraph& graph, std::span<const TaskInstance> train,
                                std::span<const TaskInstance> validation, BackendHandle backend,
                                const TextGradConfig& config, std::uint64_t seed,
                                RunLedger& ledger) {
  if (train.empty()) throw Error(ErrorCode::RangeError, "no training tasks");
  const std::size_t n = graph.size();
  PipelineValidator validator(graph, {validation.begin(), validation.end()}, backend,
                              derive_seed(seed, 0x7a11dULL));
  OptimizationResult result;
  result.params = graph.params();
  double incumbent = validator.score(result.params);
  Rng rng(seed);

  for (int t = 0; t < config.iterations; ++t) {
    const auto task_index =
        static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(train.size()) - 1));
    const std::uint64_t exec_seed = derive_seed(seed, static_cast<std::uint64_t>(t), 0xe8ecULL);
    const TaskInstance& task = train[task_index];

    bool executed = false;
    try {
      const auto trace = execute(graph, result.params, task, *backend, exec_seed);
      executed = true;
      const auto sink = *graph.index_of(graph.sinks().front());
      const auto loss = final_loss_text(task, trace.outputs[sink].text);
      const auto bp = backprop_update(
          graph, result.params, trace, loss, *backend,
          BackpropOptions{config.summary_cap, t, derive_seed(seed, static_cast<std::uint64_t>(t), 0xb9ULL),
                          config.max_threads},
          &ledger);

      std::vector<double> scores(n, 0.0);
      parallel_for(
          n,
          [&](std::size_t i) {
            if (bp.candidates[i]) scores[i] = validator.score_with(result.params, i, *bp.candidates[i]);
          },
          config.max_threads);

      auto next = result.params;
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (!bp.attempted[i]) continue;
        const bool accepted = bp.candidates[i] && scores[i] >= incumbent;
        ledger.record(UpdateRecord{t, graph.node(i).id, accepted, scores[i], incumbent,
                                   result.params[i].temperature});
        if (accepted) {
          next[i] = *bp.candidates[i];
          changed = true;
        }
      }
      if (changed) {
        result.params = std::move(next);
        incumbent = validator.score(result.params);
      }
    } catch (const ContextOverflowError& e) {
      ledger.record(OverflowRecord{t, e.node_id(), executed ? "backprop" : "execute",
                                   e.requested_tokens(), e.limit_tokens()});
    } catch (const Error& e) {
      ledger.record(FailureRecord{t, e.node_id(), executed ? "backprop" : "execute", e.what()});
    }

    result.objective.push_back(1.0 - incumbent);
    IterationRecord it;
    it.iteration = t;
    it.task_index = task_index;
    it.seed = exec_seed;
    it.objective = 1.0 - incumbent;
    for (std::size_t i = 0; i < n; ++i) {
      it.temperatures.emplace_back(graph.node(i).id, result.params[i].temperature);
    }
    ledger.record(std::move(it));
  }
  return result;
}

}  // namespace tep
