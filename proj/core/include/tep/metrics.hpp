#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>

namespace tep {

class RunLedger;

/// Number of whitespace-delimited words in `text`. Whitespace is any Unicode
/// White_Space code point; the input is decoded as UTF-8 (invalid bytes count
/// as word characters).
std::size_t token_count(std::string_view text) noexcept;

/// Keeps the first `max_tokens` words of `text`, preserving the original
/// spacing between them. Trailing whitespace is dropped.
std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) noexcept;

/// Accepted / attempted node updates recorded in the ledger.
/// Throws Error(NoAttempts) for a ledger without update attempts.
double effective_update_rate(const RunLedger& ledger);

/// Per scale (or depth) summary of one optimisation run.
struct DepthMetrics {
  int scale_or_depth = 0;
  double mean_feedback_tokens = 0.0;  // B(s)
  std::optional<double> update_rate;  // rho(s); empty when nothing was attempted
  std::size_t overflow_count = 0;
  std::size_t attempted_updates = 0;
  std::size_t accepted_updates = 0;
};

DepthMetrics depth_metrics(const RunLedger& ledger, int scale_or_depth);

/// Exponential fit B(s) ~ c * gamma^s.
struct GrowthFit {
  double gamma = 0.0;
  double prefactor = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares on (s, ln B). Needs at least three points with
/// distinct abscissae and strictly positive values.
GrowthFit fit_growth(std::span<const std::pair<double, double>> series);

/// Bounded-capacity channel with geometric per-hop contraction.
struct ChannelModel {
  double kappa = 1.0;   // bits per token
  double alpha = 1.0;   // per-hop contraction, (0, 1]
  double budget = 0.0;  // tokens
};

void validate(const ChannelModel& model);

/// Upper bound on task-relevant bits surviving `hops` reformulations:
/// kappa * budget * alpha^hops.
double channel_bound(const ChannelModel& model, unsigned hops);

/// Smallest integer budget B with kappa * B * alpha^hops >= target_bits.
/// `model.budget` is ignored.
std::uint64_t required_budget(const ChannelModel& model, unsigned hops, double target_bits);

}  // namespace tep
