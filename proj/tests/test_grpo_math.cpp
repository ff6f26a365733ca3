#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "srpo/grpo_math.hpp"

namespace srpo {
namespace {

std::shared_ptr<const DecisionSchema> tiny_schema() {
  return std::make_shared<const DecisionSchema>(std::vector<SlotSpec>{
      {"pick", {"a", "b", "c"}, {"*"}},
      {"other", {"x", "y"}, {"p", "q"}},
  });
}

TEST(AdvantageTest, HandComputedGroup) {
  const std::vector<double> r = {1.6, 1.0, 0.5, 0.0};
  const AdvantageSet a = advantages(r);
  EXPECT_FALSE(a.degenerate);
  EXPECT_NEAR(a.group_mean, 0.775, 1e-15);
  EXPECT_NEAR(a.advantages[0], 1.3907841814715955, 1e-12);
  EXPECT_NEAR(a.advantages[1], 0.37930477676498053, 1e-12);
  EXPECT_NEAR(a.advantages[2], -0.4635947271571985, 1e-12);
  EXPECT_NEAR(a.advantages[3], -1.3064942310793777, 1e-12);
}

TEST(AdvantageTest, DegenerateGroupIsZero) {
  const std::vector<double> r(8, 0.7);
  const AdvantageSet a = advantages(r);
  EXPECT_TRUE(a.degenerate);
  for (double v : a.advantages) EXPECT_EQ(v, 0.0);
}

TEST(AdvantageTest, TooSmallGroupThrows) {
  EXPECT_THROW(advantages(std::vector<double>{1.0}), GroupTooSmall);
  EXPECT_THROW(advantages(std::vector<double>{}), GroupTooSmall);
}

TEST(AdvantageTest, AssignWritesMembers) {
  RolloutGroup g;
  for (double r : {1.0, 0.0}) g.members.push_back(Rollout{{}, r, false, 0.0});
  assign_advantages(g);
  EXPECT_DOUBLE_EQ(g.members[0].advantage, 1.0);
  EXPECT_DOUBLE_EQ(g.members[1].advantage, -1.0);
}

TEST(SurrogateTest, ClipsInTheAdvantageDirection) {
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
  EXPECT_DOUBLE_EQ(clipped_surrogate(1.0, 2.0, 0.2), 2.0);
}

TEST(KlTest, HandValuesAndBounds) {
  EXPECT_EQ(kl_k3(-1.3, -1.3), 0.0);
  EXPECT_NEAR(kl_k3(-2.0, -1.0), std::exp(1.0) - 2.0, 1e-15);
  EXPECT_NEAR(kl_k3(0.0, std::log(0.5)), 0.5 - std::log(0.5) - 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(kl_k3(-1000.0, 0.0)));
  EXPECT_NEAR(kl_k3(-1000.0, 0.0), std::exp(20.0) - 21.0, 1e-6);
}

TEST(ObjectiveTest, FreshSnapshotHasUnitRatiosAndNoClipping) {
  const auto schema = tiny_schema();
  TabularPolicy p(schema);
  p.set_logit(0, 2, 0.8);
  std::vector<RolloutGroup> groups(1);
  groups[0].members = {Rollout{{{0, 2, p.log_prob(0, 2)}, {2, 1, p.log_prob(2, 1)}}, 1.0, true, 1.0},
                       Rollout{{{0, 0, p.log_prob(0, 0)}}, 0.0, false, -1.0}};
  const ObjectiveResult r = objective(groups, p, p, 0.2, 0.1);
  EXPECT_EQ(r.clip.ratio_clip_upper_frac, 0.0);
  EXPECT_EQ(r.clip.ratio_clip_lower_frac, 0.0);
  EXPECT_EQ(r.clip.mean_ratio, 1.0);
  EXPECT_EQ(r.kl, 0.0);
  EXPECT_EQ(r.num_slots, 3u);
  // (1 * 1) / 2 members + (-1) / 2 members
  EXPECT_NEAR(r.surrogate, 0.0, 1e-15);
}

TEST(ObjectiveTest, GradientMatchesFiniteDifferences) {
  const auto schema = tiny_schema();
  TabularPolicy cur(schema, 1.3), old(schema, 1.3), ref(schema, 1.3);
  const double vals[] = {0.2, -0.5, 0.9, 0.1, -0.3, 0.6, 0.0};
  for (std::size_t i = 0; i < cur.num_params(); ++i) {
    cur.mutable_params()[i] = vals[i];
    old.mutable_params()[i] = vals[i] + (i % 2 ? 0.35 : -0.3);
    ref.mutable_params()[i] = -vals[i];
  }
  std::vector<RolloutGroup> groups(2);
  groups[0].members = {Rollout{{{0, 1, old.log_prob(0, 1)}, {1, 0, old.log_prob(1, 0)}}, 0, false, 0.8},
                       Rollout{{{0, 2, old.log_prob(0, 2)}}, 0, false, -1.1}};
  groups[1].members = {Rollout{{{2, 1, old.log_prob(2, 1)}, {0, 0, old.log_prob(0, 0)}}, 0, false, 1.7},
                       Rollout{{{2, 0, old.log_prob(2, 0)}}, 0, false, -0.4},
                       Rollout{{{1, 1, old.log_prob(1, 1)}}, 0, false, 0.3}};
  const ObjectiveResult r = objective(groups, cur, ref, 0.2, 0.05);
  const double h = 1e-6;
  for (std::size_t i = 0; i < cur.num_params(); ++i) {
    TabularPolicy a = cur, b = cur;
    a.mutable_params()[i] += h;
    b.mutable_params()[i] -= h;
    const double numeric = (objective(groups, a, ref, 0.2, 0.05).value -
                            objective(groups, b, ref, 0.2, 0.05).value) / (2 * h);
    EXPECT_NEAR(r.gradient[i], numeric, 1e-4 * std::max(1.0, std::abs(numeric))) << i;
  }
}

TEST(ObjectiveTest, ClippedSlotContributesNoSurrogateGradient) {
  const auto schema = tiny_schema();
  TabularPolicy cur(schema), old(schema);
  cur.set_logit(0, 0, 2.0);  // ratio for choice 0 well above 1.2
  std::vector<RolloutGroup> groups(1);
  groups[0].members = {Rollout{{{0, 0, old.log_prob(0, 0)}}, 0, false, 1.0}};
  const ObjectiveResult r = objective(groups, cur, cur, 0.2, 0.0);
  EXPECT_EQ(r.clip.ratio_clip_upper_frac, 1.0);
  for (double g : r.gradient) EXPECT_EQ(g, 0.0);
  EXPECT_DOUBLE_EQ(r.surrogate, 1.2);
}

TEST(ObjectiveTest, EmptyInputIsZero) {
  const TabularPolicy p(tiny_schema());
  const ObjectiveResult r = objective({}, p, p, 0.2, 0.0);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.num_slots, 0u);
}

RolloutGroup group_with(std::size_t correct, std::size_t size) {
  RolloutGroup g;
  for (std::size_t i = 0; i < size; ++i) g.members.push_back(Rollout{{}, 0.0, i < correct, 0.0});
  return g;
}

TEST(FilterTest, KeepsOnlyMixedGroups) {
  std::vector<RolloutGroup> gs;
  for (std::size_t k = 0; k <= 8; ++k) {
    gs.push_back(group_with(k, 8));
    gs.back().prompt_id = k;
  }
  const auto kept = accuracy_filter(gs);
  ASSERT_EQ(kept.size(), 7u);
  EXPECT_EQ(kept.front().prompt_id, 1u);
  EXPECT_EQ(kept.back().prompt_id, 7u);
}

TEST(FilterTest, BoundariesAreInclusive) {
  const std::vector<RolloutGroup> gs = {group_with(1, 10), group_with(9, 10)};
  EXPECT_EQ(accuracy_filter(gs).size(), 2u);
  EXPECT_EQ(accuracy_filter(gs, 0.11, 0.9).size(), 1u);
}

TEST(FilterTest, RejectsBadBounds) {
  const std::vector<RolloutGroup> gs = {group_with(1, 2)};
  EXPECT_THROW(accuracy_filter(gs, 0.5, 0.5), InvalidConfig);
  EXPECT_THROW(accuracy_filter(gs, -0.1, 0.9), InvalidConfig);
  EXPECT_THROW(accuracy_filter(gs, 0.1, 1.1), InvalidConfig);
}

}  // namespace
}  // namespace srpo
