#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "tep/error.hpp"
#include "tep/ledger.hpp"
#include "tep/metrics.hpp"
#include "tep/random.hpp"
#include "tep/text.hpp"

using namespace tep;

TEST(TokenCount, Examples) {
  EXPECT_EQ(token_count(""), 0u);
  EXPECT_EQ(token_count("fix the loop"), 3u);
  EXPECT_EQ(token_count("  leading\tand\ntrailing  "), 3u);
  // No-break space (U+00A0) and ideographic space (U+3000) separate words.
  EXPECT_EQ(token_count("a\xC2\xA0" "b\xE3\x80\x80" "c"), 3u);
  EXPECT_EQ(token_count("caf\xC3\xA9 na\xC3\xAFve"), 2u);
}

TEST(TokenCount, AdditiveUnderSpaceConcatenation) {
  Rng rng(1);
  const std::string alphabet = "ab cd\tef\ngh  ij.";
  for (int i = 0; i < 2000; ++i) {
    std::string a, b;
    for (int k = 0, n = static_cast<int>(rng() % 30); k < n; ++k) a += alphabet[rng() % alphabet.size()];
    for (int k = 0, n = static_cast<int>(rng() % 30); k < n; ++k) b += alphabet[rng() % alphabet.size()];
    ASSERT_EQ(token_count(a + " " + b), token_count(a) + token_count(b)) << a << "|" << b;
  }
}

TEST(TruncateTokens, KeepsLeadingWords) {
  EXPECT_EQ(truncate_tokens("a  b c d", 2), "a  b");
  EXPECT_EQ(truncate_tokens("a b", 5), "a b");
  EXPECT_EQ(truncate_tokens("a b", 0), "");
}

TEST(EffectiveUpdateRate, Ratio) {
  RunLedger ledger;
  for (int i = 0; i < 10; ++i) ledger.record(UpdateRecord{0, "n", i < 3, 0, 0, 0.5});
  EXPECT_DOUBLE_EQ(effective_update_rate(ledger), 0.3);
  RunLedger all;
  for (int i = 0; i < 4; ++i) all.record(UpdateRecord{0, "n", true, 0, 0, 0.5});
  EXPECT_DOUBLE_EQ(effective_update_rate(all), 1.0);
  RunLedger empty;
  try {
    effective_update_rate(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoAttempts);
  }
}

TEST(DepthMetrics, SummarisesLedger) {
  RunLedger ledger;
  ledger.record(SignalRecord{0, "a", 0, 10, 1, std::nullopt, false});
  ledger.record(SignalRecord{0, "b", 1, 30, 2, std::nullopt, false});
  ledger.record(OverflowRecord{0, "c", "critique", 200, 100});
  ledger.record(UpdateRecord{0, "a", true, 1, 1, 0.5});
  ledger.record(UpdateRecord{0, "b", false, 0, 1, 0.5});
  auto m = depth_metrics(ledger, 3);
  EXPECT_EQ(m.scale_or_depth, 3);
  EXPECT_DOUBLE_EQ(m.mean_feedback_tokens, 20.0);
  EXPECT_DOUBLE_EQ(*m.update_rate, 0.5);
  EXPECT_EQ(m.overflow_count, 1u);
  EXPECT_EQ(m.attempted_updates, 2u);
  EXPECT_FALSE(depth_metrics(RunLedger{}, 1).update_rate);
}

TEST(FitGrowth, ExactSeries) {
  std::vector<std::pair<double, double>> doubling{{1, 2}, {2, 4}, {3, 8}, {4, 16}};
  auto fit = fit_growth(doubling);
  EXPECT_NEAR(fit.gamma, 2.0, 1e-12);
  EXPECT_NEAR(fit.prefactor, 1.0, 1e-12);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  std::vector<std::pair<double, double>> flat{{1, 5}, {2, 5}, {3, 5}, {4, 5}};
  EXPECT_NEAR(fit_growth(flat).gamma, 1.0, 1e-12);
}

TEST(FitGrowth, RecoversAnyGeometricRatio) {
  for (double ratio : {0.3, 0.9, 1.1, 2.2, 7.5}) {
    for (double c : {0.01, 1.0, 250.0}) {
      std::vector<std::pair<double, double>> series;
      for (int s = 1; s <= 6; ++s) series.emplace_back(s, c * std::pow(ratio, s));
      auto fit = fit_growth(series);
      EXPECT_NEAR(fit.gamma, ratio, 1e-9 * ratio);
      EXPECT_NEAR(fit.prefactor, c, 1e-9 * c);
    }
  }
}

TEST(FitGrowth, Preconditions) {
  auto code = [](std::vector<std::pair<double, double>> s) {
    try {
      fit_growth(s);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code({{1, 2}, {2, 4}}), ErrorCode::InsufficientData);
  EXPECT_EQ(code({{1, 2}, {2, 0}, {3, 8}}), ErrorCode::NonPositiveValue);
  EXPECT_EQ(code({{1, 2}, {1, 4}, {1, 8}}), ErrorCode::InsufficientData);
}

TEST(Channel, BoundExamples) {
  ChannelModel m{4, 0.5, 100};
  EXPECT_DOUBLE_EQ(channel_bound(m, 3), 50.0);
  EXPECT_DOUBLE_EQ(channel_bound(m, 0), 400.0);
  ChannelModel lossless{4, 1.0, 100};
  for (unsigned k = 0; k <= 20; ++k) EXPECT_DOUBLE_EQ(channel_bound(lossless, k), 400.0);
  for (unsigned k = 0; k < 20; ++k) EXPECT_LT(channel_bound(m, k + 1), channel_bound(m, k));
}

TEST(Channel, RequiredBudgetExamples) {
  ChannelModel m{1, 0.5, 0};
  EXPECT_EQ(required_budget(m, 3, 10), 80u);
  EXPECT_EQ(required_budget(m, 0, 10), 10u);
  EXPECT_EQ(required_budget(m, 1, 10), 20u);
  EXPECT_EQ(required_budget(m, 2, 10), 40u);
}

TEST(Channel, BudgetRoundTripMeetsTarget) {
  for (double kappa : {0.5, 1.0, 3.0}) {
    for (double alpha : {0.3, 0.5, 0.9}) {
      for (unsigned k = 0; k <= 12; ++k) {
        for (double target : {1.0, 10.0, 77.7}) {
          ChannelModel m{kappa, alpha, 0};
          const auto b = required_budget(m, k, target);
          m.budget = static_cast<double>(b);
          EXPECT_GE(channel_bound(m, k), target * (1 - 1e-12));
          if (b > 1) {
            m.budget = static_cast<double>(b - 1);
            EXPECT_LT(channel_bound(m, k), target);
          }
        }
      }
    }
  }
}

TEST(Channel, InvalidModels) {
  EXPECT_THROW(validate(ChannelModel{1, 0.0, 1}), Error);
  EXPECT_THROW(validate(ChannelModel{1, 1.5, 1}), Error);
  EXPECT_THROW(validate(ChannelModel{-1, 0.5, 1}), Error);
}

TEST(Ledger, JsonlHasOneValidObjectPerRecord) {
  RunLedger ledger;
  ledger.set_context("tep", "counting", 2, 7);
  std::vector<std::string> sunk;
  ledger.set_sink([&](const std::string& line) { sunk.push_back(line); });
  ledger.note("start", "run \"quoted\"");
  ledger.record(SignalRecord{0, "a", 0, 5, 1, 0.5, true});
  ledger.record(PhaseRecord{0, "a", "free", "converged", 3, {5, 6, 6}, 4, 1, false});
  ledger.record(IterationRecord{0, 1, 2, 0.25, 1.0, {{"a", 0.5}}});
  std::istringstream in(ledger.to_jsonl());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["method"], "tep");
    EXPECT_EQ(j["family"], "counting");
    EXPECT_EQ(j["scale_or_depth"], 2);
    EXPECT_EQ(line, sunk[n]);
    ++n;
  }
  EXPECT_EQ(n, 4);
  RunLedger copy = ledger;
  EXPECT_EQ(copy.to_jsonl(), ledger.to_jsonl());
  EXPECT_EQ(copy.signals().size(), 1u);
}

TEST(Text, Sections) {
  auto doc = text::section("A", "one\ntwo") + text::section("B", "three") + text::section("A", "four");
  EXPECT_EQ(text::find_section(doc, "A").value(), "one\ntwo");
  EXPECT_EQ(text::find_section(doc, "B").value(), "three");
  EXPECT_FALSE(text::find_section(doc, "C"));
  auto all = text::find_sections(doc, "A");
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1], "four");
  // A bracketed token inside a line is not a header.
  auto inline_doc = text::section("A", "see [B] here");
  EXPECT_EQ(text::find_section(inline_doc, "A").value(), "see [B] here");
}
