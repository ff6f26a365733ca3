#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "srpo/env.hpp"
#include "srpo/rollout.hpp"

namespace srpo {
namespace {

TaskSetSpec spec_with(std::uint64_t seed, std::size_t count = 300) {
  TaskSetSpec s;
  s.seed = seed;
  s.count = count;
  return s;
}

TEST(GenerateTest, DeterministicPerSeed) {
  const auto a = generate(spec_with(4));
  const auto b = generate(spec_with(4));
  const auto c = generate(spec_with(5));
  ASSERT_EQ(a.size(), 300u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].question_text, b[i].question_text);
    EXPECT_EQ(a[i].cue_index, b[i].cue_index);
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i].question_text == c[i].question_text ? 1 : 0;
  EXPECT_LT(same, 30u);
}

TEST(GenerateTest, PrefixStableWhenCountGrows) {
  const auto small = generate(spec_with(8, 10));
  const auto large = generate(spec_with(8, 50));
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].question_text, large[i].question_text);
}

TEST(GenerateTest, TasksAreValid) {
  for (const Task& t : generate(spec_with(9))) {
    EXPECT_EQ(t.candidate_answers.size(), 4u);
    const std::set<std::string> unique(t.candidate_answers.begin(), t.candidate_answers.end());
    EXPECT_EQ(unique.size(), 4u);
    EXPECT_NO_THROW(t.gold_index());
    EXPECT_LT(t.cue_index, 4u);
    EXPECT_GE(t.distractor_strength, 0.2);
    EXPECT_LE(t.distractor_strength, 0.6);
    EXPECT_EQ(t.self_check_reliability, 1.0);
  }
}

TEST(GenerateTest, CueMisleadsAtDistractorRate) {
  TaskSetSpec s = spec_with(10, 20000);
  s.distractor_lo = s.distractor_hi = 0.3;
  std::size_t misleading = 0;
  std::array<std::size_t, 3> domains{};
  for (const Task& t : generate(s)) {
    misleading += t.cue_index != t.gold_index() ? 1 : 0;
    ++domains[static_cast<std::size_t>(t.domain_tag)];
  }
  EXPECT_NEAR(misleading / 20000.0, 0.3, 0.015);
  for (std::size_t d : domains) EXPECT_NEAR(d / 20000.0, 1.0 / 3.0, 0.02);
}

TEST(GenerateTest, ValidatesSpec) {
  TaskSetSpec s;
  s.count = 0;
  EXPECT_THROW(generate(s), InvalidConfig);
  s = TaskSetSpec{};
  s.distractor_lo = 0.7;
  EXPECT_THROW(generate(s), InvalidConfig);
  s = TaskSetSpec{};
  s.num_candidates = 1;
  EXPECT_THROW(generate(s), InvalidConfig);
  s = TaskSetSpec{};
  s.mix = {0, 0, 0};
  EXPECT_THROW(generate(s), InvalidConfig);
}

TEST(SelfCheckTest, ReliableCheckIsTruthful) {
  const Task t = generate(spec_with(2, 1)).front();
  Rng rng(1);
  const std::size_t gold = t.gold_index();
  for (std::size_t first = 0; first < 4; ++first) {
    const CheckSignal s = self_check(t, first, rng);
    EXPECT_EQ(s.says_correct, first == gold);
    EXPECT_EQ(s.hint, gold);
  }
}

TEST(SelfCheckTest, UnreliableCheckLiesAtRate) {
  Task t = generate(spec_with(2, 1)).front();
  t.self_check_reliability = 0.7;
  Rng rng(12);
  const std::size_t gold = t.gold_index();
  const int n = 40000;
  int truthful = 0, hint_gold = 0;
  for (int i = 0; i < n; ++i) {
    const CheckSignal s = self_check(t, gold, rng);
    truthful += s.says_correct ? 1 : 0;
    hint_gold += s.hint == gold ? 1 : 0;
    ASSERT_LT(s.hint, 4u);
  }
  EXPECT_NEAR(truthful / double(n), 0.7, 0.01);
  EXPECT_NEAR(hint_gold / double(n), 0.7, 0.01);
}

TEST(GradeTest, GradesBothAnswers) {
  const Task t = generate(spec_with(3, 1)).front();
  const std::string wrong = t.candidate_answers[(t.gold_index() + 1) % 4];
  const std::string text = "<think>x</think><answer>$\\boxed{" + wrong +
                           "}$</answer><reflection>r</reflection><think>y</think><answer>$\\boxed{" +
                           t.gold_answer + "}$</answer>";
  const auto [first, second] = grade(t, parse(text, FormatMode::kReflective));
  EXPECT_FALSE(first);
  EXPECT_TRUE(second);
}

TEST(OracleReflectionTest, StylesHaveExpectedLengths) {
  const Task t = generate(spec_with(3, 1)).front();
  EXPECT_EQ(oracle_reflection(t, t.gold_answer, ReflectionStyle::kEmpty), "");
  const std::string brief = oracle_reflection(t, "0", ReflectionStyle::kBrief);
  const std::string verbose = oracle_reflection(t, "0", ReflectionStyle::kVerbose);
  EXPECT_GT(count_tokens(brief), 0u);
  EXPECT_LE(count_tokens(brief), 20u);
  EXPECT_GT(count_tokens(verbose), 20u);
  EXPECT_NE(brief.find(t.gold_answer), std::string::npos);
}

TEST(TaskJsonTest, RoundTrip) {
  const auto tasks = generate(spec_with(6, 20));
  std::stringstream ss;
  write_tasks(tasks, ss);
  const auto back = read_tasks(ss);
  ASSERT_EQ(back.size(), tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(back[i].task_id, tasks[i].task_id);
    EXPECT_EQ(back[i].candidate_answers, tasks[i].candidate_answers);
    EXPECT_EQ(back[i].gold_answer, tasks[i].gold_answer);
    EXPECT_EQ(back[i].cue_index, tasks[i].cue_index);
    EXPECT_EQ(back[i].domain_tag, tasks[i].domain_tag);
    EXPECT_DOUBLE_EQ(back[i].distractor_strength, tasks[i].distractor_strength);
  }
}

TEST(TaskJsonTest, BadRecordIsDataError) {
  std::istringstream bad("{\"task_id\": 1}\n");
  EXPECT_THROW(read_tasks(bad), DataError);
  std::istringstream junk("not json\n");
  EXPECT_THROW(read_tasks(junk), DataError);
}

TEST(EpisodeTest, ReproducibleFromSeed) {
  const Task t = generate(spec_with(7, 1)).front();
  const TabularPolicy p(make_schema(4));
  const Episode a = play_episode(p, t, FormatMode::kReflective, {}, 42);
  const Episode b = play_episode(p, t, FormatMode::kReflective, {}, 42);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.decisions.size(), 8u);
  EXPECT_DOUBLE_EQ(a.reward.r_total, b.reward.r_total);
}

TEST(EpisodeTest, ModesUseTheirSlots) {
  const Task t = generate(spec_with(7, 1)).front();
  const TabularPolicy p(make_schema(4));
  EXPECT_EQ(play_episode(p, t, FormatMode::kTwoStepThinking, {}, 1).decisions.size(), 6u);
  EXPECT_EQ(play_episode(p, t, FormatMode::kPlain, {}, 1).decisions.size(), 3u);
}

TEST(EpisodeTest, TwoStepReviseIsBlind) {
  const Task t = generate(spec_with(7, 1)).front();
  const TabularPolicy p(make_schema(4));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Episode e = play_episode(p, t, FormatMode::kTwoStepThinking, {}, s);
    EXPECT_FALSE(e.signal.has_value());
    EXPECT_EQ(p.schema().row_context(e.decisions.back().row), 0u);
  }
}

TEST(EpisodeTest, GreedyTaggedPolicyIsWellFormedAndNearTarget) {
  const Task t = generate(spec_with(7, 1)).front();
  TabularPolicy p(make_schema(4));
  const auto& sch = p.schema();
  p.set_logit(sch.row(slot::kReflectionStyle, std::size_t{0}), 1, 1.0);  // brief
  const Episode e = play_episode(p, t, FormatMode::kReflective, {}, 0, true);
  EXPECT_TRUE(e.response.well_formed);
  EXPECT_EQ(e.response.think1_length, 40u);
  EXPECT_EQ(e.response.total_length, 79u);
  EXPECT_NEAR(e.reward.f_len, 0.9048374180359596, 1e-12);
}

TEST(EpisodeTest, CandidateMismatchIsRejected) {
  const Task t = generate(spec_with(7, 1)).front();
  const TabularPolicy p(make_schema(3));
  EXPECT_THROW(play_episode(p, t, FormatMode::kReflective, {}, 0), UnknownContext);
}

}  // namespace
}  // namespace srpo
