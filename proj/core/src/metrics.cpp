#include "tep/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "tep/error.hpp"
#include "tep/ledger.hpp"

namespace tep {

namespace {

bool is_unicode_space(char32_t cp) noexcept {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one code point starting at text[i]; returns its byte length.
// Malformed sequences decode as a single non-space unit of length 1.
std::size_t decode(std::string_view text, std::size_t i, char32_t& cp) noexcept {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len = 1;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    cp = 0xFFFD;
    return 1;
  }
  if (i + len > text.size()) {
    cp = 0xFFFD;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      cp = 0xFFFD;
      return 1;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  return len;
}

// Calls fn(word_begin, word_end) for each word; stops early when fn returns false.
template <typename Fn>
void scan_words(std::string_view text, Fn&& fn) noexcept {
  std::size_t i = 0;
  std::size_t word_begin = std::string_view::npos;
  while (i < text.size()) {
    char32_t cp = 0;
    const std::size_t len = decode(text, i, cp);
    if (is_unicode_space(cp)) {
      if (word_begin != std::string_view::npos) {
        if (!fn(word_begin, i)) return;
        word_begin = std::string_view::npos;
      }
    } else if (word_begin == std::string_view::npos) {
      word_begin = i;
    }
    i += len;
  }
  if (word_begin != std::string_view::npos) fn(word_begin, text.size());
}

}  // namespace

std::size_t token_count(std::string_view text) noexcept {
  std::size_t n = 0;
  scan_words(text, [&](std::size_t, std::size_t) {
    ++n;
    return true;
  });
  return n;
}

std::string_view truncate_tokens(std::string_view text, std::size_t max_tokens) noexcept {
  if (max_tokens == 0) return {};
  std::size_t seen = 0;
  std::size_t end = 0;
  scan_words(text, [&](std::size_t, std::size_t e) {
    end = e;
    return ++seen < max_tokens;
  });
  return text.substr(0, end);
}

double effective_update_rate(const RunLedger& ledger) {
  const std::size_t attempted = ledger.attempted_updates();
  if (attempted == 0) throw Error(ErrorCode::NoAttempts, "ledger holds no update attempts");
  return static_cast<double>(ledger.accepted_updates()) / static_cast<double>(attempted);
}

DepthMetrics depth_metrics(const RunLedger& ledger, int scale_or_depth) {
  DepthMetrics m;
  m.scale_or_depth = scale_or_depth;
  const auto& signals = ledger.signals();
  if (!signals.empty()) {
    double total = 0.0;
    for (const auto& s : signals) total += static_cast<double>(s.token_count);
    m.mean_feedback_tokens = total / static_cast<double>(signals.size());
  }
  m.attempted_updates = ledger.attempted_updates();
  m.accepted_updates = ledger.accepted_updates();
  if (m.attempted_updates > 0) m.update_rate = effective_update_rate(ledger);
  m.overflow_count = ledger.overflows().size();
  return m;
}

GrowthFit fit_growth(std::span<const std::pair<double, double>> series) {
  if (series.size() < 3) {
    throw Error(ErrorCode::InsufficientData, "growth fit needs at least three points");
  }
  const double n = static_cast<double>(series.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& [x, b] : series) {
    if (!(b > 0.0)) throw Error(ErrorCode::NonPositiveValue, "growth fit needs B > 0");
    mean_x += x;
    mean_y += std::log(b);
  }
  mean_x /= n;
  mean_y /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [x, b] : series) {
    const double dx = x - mean_x;
    const double dy = std::log(b) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw Error(ErrorCode::InsufficientData, "growth fit needs distinct abscissae");
  const double slope = sxy / sxx;
  const double intercept = mean_y - slope * mean_x;
  double ss_res = 0.0;
  for (const auto& [x, b] : series) {
    const double r = std::log(b) - (intercept + slope * x);
    ss_res += r * r;
  }
  GrowthFit fit;
  fit.gamma = std::exp(slope);
  fit.prefactor = std::exp(intercept);
  // A flat series is fitted exactly by gamma = 1.
  fit.r_squared = syy == 0.0 ? 1.0 : std::max(0.0, 1.0 - ss_res / syy);
  return fit;
}

void validate(const ChannelModel& model) {
  if (!(model.kappa > 0.0)) throw Error(ErrorCode::InvalidModel, "kappa must be positive");
  if (!(model.alpha > 0.0 && model.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidModel, "alpha must lie in (0, 1]");
  }
  if (!(model.budget >= 0.0)) throw Error(ErrorCode::InvalidModel, "budget must be non-negative");
}

double channel_bound(const ChannelModel& model, unsigned hops) {
  validate(model);
  return model.kappa * model.budget * std::pow(model.alpha, static_cast<double>(hops));
}

std::uint64_t required_budget(const ChannelModel& model, unsigned hops, double target_bits) {
  ChannelModel probe = model;
  probe.budget = 0.0;
  validate(probe);
  if (!(target_bits > 0.0)) throw Error(ErrorCode::RangeError, "target_bits must be positive");
  const double efficiency = model.kappa * std::pow(model.alpha, static_cast<double>(hops));
  const double estimate = std::ceil(target_bits / efficiency);
  if (!(estimate < 9.0e18)) throw Error(ErrorCode::Overflow, "required budget exceeds 64 bits");
  auto budget = static_cast<std::uint64_t>(estimate);
  // Repair rounding in either direction so the result is the exact minimum.
  while (budget > 0 && efficiency * static_cast<double>(budget - 1) >= target_bits) --budget;
  while (efficiency * static_cast<double>(budget) < target_bits) ++budget;
  return budget;
}

}  // namespace tep
