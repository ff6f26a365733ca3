#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "srpo/reward.hpp"

namespace srpo {
namespace {

std::string reflective(const std::string& think1, const std::string& a1, const std::string& refl,
                       const std::string& a2) {
  return "<think> " + think1 + " </think>\n<answer> $\\boxed{" + a1 + "}$ </answer>\n<reflection> " + refl +
         " </reflection>\n<think> again </think>\n<answer> $\\boxed{" + a2 + "}$ </answer>";
}

TEST(IEffTest, TruthTable) {
  const RewardConfig cfg;
  EXPECT_EQ(i_eff(true, true, cfg), 0.25);
  EXPECT_EQ(i_eff(false, true, cfg), 0.5);
  EXPECT_EQ(i_eff(false, false, cfg), 0.0);
  EXPECT_EQ(i_eff(true, false, cfg), -0.25);
}

TEST(FLenTest, PeaksAtTargetAndHitsEMinusTwoAtMax) {
  EXPECT_EQ(f_len(200, 200, 250), 1.0);
  EXPECT_NEAR(f_len(250, 200, 250), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(f_len(150, 200, 250), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(f_len(300, 200, 250), 0.01831563888873418, 1e-15);
}

TEST(FLenTest, RejectsDegenerateWindow) {
  EXPECT_THROW(f_len(10, 20, 20), InvalidConfig);
  EXPECT_THROW(f_len(10, 20, 15), InvalidConfig);
}

TEST(LengthTargetsTest, ScaleWithFirstThink) {
  const RewardConfig cfg;
  const LengthTargets t = length_targets(40, cfg);
  EXPECT_EQ(t.target, 80.0);
  EXPECT_EQ(t.max, 100.0);
  const LengthTargets z = length_targets(0, cfg);
  EXPECT_GT(z.max, z.target);
}

TEST(ScoreTest, CorrectKeepEarnsEverything) {
  const RewardConfig cfg;
  // think1 has 4 tokens: target 8, max 10.
  const StructuredResponse r = parse(reflective("w w w w", "B", "", "B"), FormatMode::kReflective);
  ASSERT_TRUE(r.well_formed);
  const RewardBreakdown b = score(r, "B", cfg, FormatMode::kReflective);
  EXPECT_EQ(b.r_format, 0.5);
  EXPECT_EQ(b.r_accuracy, 0.5);
  EXPECT_EQ(b.r_task, 1.0);
  EXPECT_EQ(b.i_ref, 0.0);
  EXPECT_EQ(b.i_eff, 0.25);
  const double expected_flen = std::pow(std::exp(-std::abs(double(r.total_length) - 8.0) / 2.0), 2);
  EXPECT_DOUBLE_EQ(b.f_len, expected_flen);
  EXPECT_DOUBLE_EQ(b.r_total, 1.25 + 0.1 * expected_flen);
}

TEST(ScoreTest, WrongThenFixed) {
  const RewardConfig cfg;
  const StructuredResponse r = parse(reflective("x", "A", "recheck", "B"), FormatMode::kReflective);
  const RewardBreakdown b = score(r, "B", cfg, FormatMode::kReflective);
  EXPECT_EQ(b.r_accuracy, 0.0);
  EXPECT_EQ(b.i_ref, 0.25);
  EXPECT_EQ(b.i_eff, 0.5);
  EXPECT_FALSE(b.first_correct);
  EXPECT_TRUE(b.second_correct);
}

TEST(ScoreTest, MalformedLosesFormatAndReflectionTerms) {
  const RewardConfig cfg;
  const StructuredResponse r =
      parse("<think>x</think><answer>$\\boxed{B}$</answer><reflection>r</reflection>", FormatMode::kReflective);
  ASSERT_FALSE(r.well_formed);
  const RewardBreakdown b = score(r, "B", cfg, FormatMode::kReflective);
  EXPECT_EQ(b.r_format, 0.0);
  EXPECT_EQ(b.r_accuracy, 0.5);
  EXPECT_EQ(b.i_ref, 0.0);
  EXPECT_EQ(b.i_eff, 0.0);
  EXPECT_EQ(b.f_len, 0.0);
}

TEST(ScoreTest, PlainAndTwoStepModes) {
  const RewardConfig cfg;
  const RewardBreakdown plain =
      score(parse("<think>x</think><answer>$\\boxed{B}$</answer>", FormatMode::kPlain), "B", cfg, FormatMode::kPlain);
  EXPECT_EQ(plain.r_total, 1.0);
  EXPECT_EQ(plain.r_reflection, 0.0);

  const StructuredResponse two = parse(
      "<think>x</think><answer>$\\boxed{B}$</answer><think>y</think><answer>$\\boxed{A}$</answer>",
      FormatMode::kTwoStepThinking);
  const RewardBreakdown b = score(two, "B", cfg, FormatMode::kTwoStepThinking);
  EXPECT_EQ(b.i_eff, -0.25);
  EXPECT_EQ(b.i_ref, 0.0);
  EXPECT_EQ(b.f_len, 0.0);
  EXPECT_EQ(b.r_total, 0.75);
}

TEST(ScoreTest, NeverExceedsMaxTotal) {
  const RewardConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.max_total(), 1.6);
  for (const char* a1 : {"A", "B"}) {
    for (const char* a2 : {"A", "B"}) {
      for (const char* refl : {"", "short note", "a much longer reflection with many many words in it"}) {
        const auto b = score(parse(reflective("p q r s t", a1, refl, a2), FormatMode::kReflective), "B", cfg,
                             FormatMode::kReflective);
        EXPECT_LE(b.r_total, cfg.max_total() + 1e-12);
      }
    }
  }
}

TEST(RewardConfigTest, ValidateRejectsBadMultipliers) {
  RewardConfig cfg;
  cfg.max_multiplier = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
  cfg = RewardConfig{};
  cfg.alpha = -1;
  EXPECT_THROW(cfg.validate(), InvalidConfig);
}

}  // namespace
}  // namespace srpo
