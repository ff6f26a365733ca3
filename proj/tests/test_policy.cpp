#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "srpo/policy.hpp"
#include "srpo/rollout.hpp"

namespace srpo {
namespace {

std::shared_ptr<const DecisionSchema> small_schema() {
  return std::make_shared<const DecisionSchema>(std::vector<SlotSpec>{
      {"first", {"a", "b"}, {"*"}},
      {"second", {"x", "y", "z"}, {"left", "right"}},
  });
}

TEST(SchemaTest, RowsAndOffsets) {
  const auto s = small_schema();
  EXPECT_EQ(s->num_slots(), 2u);
  EXPECT_EQ(s->num_rows(), 3u);
  EXPECT_EQ(s->num_params(), 2u + 6u);
  EXPECT_EQ(s->row(1, "right"), 2u);
  EXPECT_EQ(s->row_offset(2), 5u);
  EXPECT_EQ(s->row_width(2), 3u);
  EXPECT_EQ(s->row_slot(2), 1u);
  EXPECT_EQ(s->row_context(2), 1u);
  EXPECT_THROW(s->row(1, "middle"), UnknownContext);
  EXPECT_THROW(s->row(0, std::size_t{1}), UnknownContext);
}

TEST(SchemaTest, HashTracksVocabulary) {
  const auto a = small_schema();
  const DecisionSchema b({{"first", {"a", "b"}, {"*"}}, {"second", {"x", "y", "w"}, {"left", "right"}}});
  EXPECT_EQ(a->hash(), small_schema()->hash());
  EXPECT_NE(a->hash(), b.hash());
}

TEST(SchemaTest, RejectsEmptyVocabulary) {
  EXPECT_THROW(DecisionSchema({{"s", {}, {"*"}}}), InvalidConfig);
  EXPECT_THROW(DecisionSchema({}), InvalidConfig);
}

TEST(PolicyTest, LogProbMatchesHandValue) {
  TabularPolicy p(small_schema());
  p.set_logit(0, 0, 1.0);
  EXPECT_NEAR(p.log_prob(0, 0), -0.3132616875182228, 1e-14);
  p.set_temperature(0.5);
  EXPECT_NEAR(std::exp(p.log_prob(0, 0)), 0.8807970779778824, 1e-14);
}

TEST(PolicyTest, UniformAtZeroLogits) {
  const TabularPolicy p(small_schema());
  for (double v : p.probabilities(1)) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(PolicyTest, RejectsUnknownChoiceAndBadTemperature) {
  TabularPolicy p(small_schema());
  EXPECT_THROW(p.log_prob(0, 2), UnknownChoice);
  EXPECT_THROW(p.log_prob(7, 0), UnknownContext);
  EXPECT_THROW(p.set_temperature(0.0), InvalidConfig);
  EXPECT_THROW(TabularPolicy(small_schema(), -1.0), InvalidConfig);
}

TEST(PolicyTest, GradientMatchesFiniteDifference) {
  TabularPolicy p(small_schema(), 0.7);
  const double logits[] = {0.3, -0.2, 1.1, 0.0, -0.7, 0.4, 0.9, -1.3};
  for (std::size_t i = 0; i < p.num_params(); ++i) p.mutable_params()[i] = logits[i];
  std::vector<double> g(p.num_params(), 0.0);
  p.accumulate_grad_log_prob(2, 1, 1.0, g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < p.num_params(); ++i) {
    TabularPolicy a = p, b = p;
    a.mutable_params()[i] += h;
    b.mutable_params()[i] -= h;
    const double numeric = (a.log_prob(2, 1) - b.log_prob(2, 1)) / (2 * h);
    EXPECT_NEAR(g[i], numeric, 1e-8) << i;
  }
}

TEST(PolicyTest, SamplingFrequenciesFollowProbabilities) {
  TabularPolicy p(small_schema());
  p.set_logit(1, 0, std::log(2.0));  // p = (0.5, 0.25, 0.25)
  Rng rng(11);
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[p.sample_choice(1, rng)];
  EXPECT_NEAR(counts[0] / double(n), 0.5, 0.005);
  EXPECT_NEAR(counts[1] / double(n), 0.25, 0.005);
  EXPECT_NEAR(counts[2] / double(n), 0.25, 0.005);
}

TEST(PolicyTest, GreedyPicksLowestArgmax) {
  TabularPolicy p(small_schema());
  p.set_logit(1, 1, 2.0);
  p.set_logit(1, 2, 2.0);
  EXPECT_EQ(p.greedy_choice(1), 1u);
  EXPECT_EQ(p.greedy_choice(0), 0u);
}

TEST(SampleTest, SkipsSlotsAndRecordsLogProbs) {
  const TabularPolicy p(small_schema());
  Rng rng(3);
  const auto ds = sample(
      p, [](std::size_t s, std::span<const Decision>) -> std::optional<std::size_t> {
        if (s == 0) return std::nullopt;
        return 1;
      },
      rng);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].row, 2u);
  EXPECT_NEAR(ds[0].logp, std::log(1.0 / 3.0), 1e-15);
  EXPECT_NEAR(log_prob(p, ds).front(), ds[0].logp, 1e-15);
}

TEST(SampleTest, SameSeedSameDecisions) {
  TabularPolicy p(small_schema());
  p.set_logit(0, 1, 0.4);
  auto ctx = [](std::size_t, std::span<const Decision>) -> std::optional<std::size_t> { return 0; };
  Rng a(99), b(99);
  for (int i = 0; i < 50; ++i) {
    const auto x = sample(p, ctx, a);
    const auto y = sample(p, ctx, b);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t j = 0; j < x.size(); ++j) EXPECT_EQ(x[j].choice, y[j].choice);
  }
}

TEST(OptimizerTest, SgdMinimizes) {
  TabularPolicy p(small_schema());
  SgdOptimizer opt(0.5);
  std::vector<double> g(p.num_params(), 0.0);
  g[3] = 2.0;
  opt.step(p, g);
  EXPECT_DOUBLE_EQ(p.params()[3], -1.0);
  std::vector<double> wrong(3, 0.0);
  EXPECT_THROW(opt.step(p, wrong), ShapeMismatch);
}

TEST(OptimizerTest, AdamFirstStepIsLearningRateTimesSign) {
  TabularPolicy p(small_schema());
  AdamOptimizer opt(0.01);
  std::vector<double> g(p.num_params(), 0.0);
  g[0] = 3.0;
  g[1] = -0.2;
  opt.step(p, g);
  EXPECT_NEAR(p.params()[0], -0.01, 1e-9);
  EXPECT_NEAR(p.params()[1], 0.01, 1e-7);
  EXPECT_EQ(p.params()[2], 0.0);
}

TEST(OptimizerTest, AdamSecondStepBiasCorrected) {
  TabularPolicy p(small_schema());
  AdamOptimizer opt(0.1);
  std::vector<double> g(p.num_params(), 0.0);
  g[0] = 1.0;
  opt.step(p, g);
  g[0] = 3.0;
  opt.step(p, g);
  // m = 0.9*0.1 + 0.1*3 = 0.39 -> /0.19; v = 0.999*0.001 + 0.001*9 = 0.009999 -> /0.001999
  const double mhat = 0.39 / 0.19;
  const double vhat = 0.009999 / 0.001999;
  const double first = -0.1 / (1.0 + 1e-8);
  EXPECT_NEAR(p.params()[0], first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8), 1e-12);
}

TEST(OptimizerTest, KindParsing) {
  EXPECT_EQ(parse_optimizer_kind("sgd"), OptimizerKind::kSgd);
  EXPECT_EQ(parse_optimizer_kind("adam"), OptimizerKind::kAdam);
  EXPECT_FALSE(parse_optimizer_kind("rmsprop").has_value());
}

TEST(CheckpointTest, RoundTripIsExact) {
  TabularPolicy p(make_schema(4), 0.9);
  Rng rng(5);
  for (double& v : p.mutable_params()) v = rng.uniform(-3, 3);
  std::stringstream ss;
  save_policy(p, ss);
  const TabularPolicy q = load_policy(ss, make_schema(4));
  EXPECT_EQ(q.temperature(), 0.9);
  for (std::size_t i = 0; i < p.num_params(); ++i) EXPECT_EQ(p.params()[i], q.params()[i]);
}

TEST(CheckpointTest, RejectsOtherSchemaAndTruncation) {
  TabularPolicy p(make_schema(4));
  std::stringstream ss;
  save_policy(p, ss);
  const std::string text = ss.str();
  std::istringstream other(text);
  EXPECT_THROW(load_policy(other, make_schema(3)), DataError);
  std::istringstream cut(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_policy(cut, make_schema(4)), DataError);
  std::istringstream empty("");
  EXPECT_THROW(load_policy(empty, make_schema(4)), DataError);
}

}  // namespace
}  // namespace srpo
