#include <gtest/gtest.h>

#include <sstream>

#include "srpo/config.hpp"

namespace srpo {
namespace {

TEST(ConfigTest, DefaultsValidate) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.group_size, 8u);
  EXPECT_EQ(c.epsilon, 0.2);
  EXPECT_EQ(c.beta, 0.0);
  EXPECT_EQ(c.reward.alpha, 0.1);
  EXPECT_EQ(c.num_tasks, 512u);
}

TEST(ConfigTest, LoadsKeyValueLines) {
  std::istringstream in(
      "# comment\n"
      "group_size = 4   # trailing\n"
      "\n"
      "mode = two-step\n"
      "algorithm=ppo\n"
      "reward.alpha = 0.25\n"
      "filter_enabled = false\n"
      "optimizer = adam\n");
  RunConfig c;
  load_config(in, c);
  EXPECT_EQ(c.group_size, 4u);
  EXPECT_EQ(c.mode, FormatMode::kTwoStepThinking);
  EXPECT_EQ(c.algorithm, Algorithm::kPpo);
  EXPECT_EQ(c.reward.alpha, 0.25);
  EXPECT_FALSE(c.filter_enabled);
  EXPECT_EQ(c.optimizer, OptimizerKind::kAdam);
}

TEST(ConfigTest, ErrorsNameTheLine) {
  RunConfig c;
  std::istringstream unknown("seed = 1\ncolour = blue\n");
  try {
    load_config(unknown, c);
    FAIL();
  } catch (const InvalidConfig& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream no_eq("seed 4\n");
  EXPECT_THROW(load_config(no_eq, c), InvalidConfig);
  std::istringstream bad_num("epsilon = lots\n");
  EXPECT_THROW(load_config(bad_num, c), InvalidConfig);
  std::istringstream neg("group_size = -3\n");
  EXPECT_THROW(load_config(neg, c), InvalidConfig);
  std::istringstream bad_bool("filter_enabled = maybe\n");
  EXPECT_THROW(load_config(bad_bool, c), InvalidConfig);
}

TEST(ConfigTest, MissingFileIsConfigError) {
  EXPECT_THROW(load_config_file("/nonexistent/run.cfg"), InvalidConfig);
}

TEST(ConfigTest, ValidateRejectsOutOfRange) {
  auto expect_invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), InvalidConfig);
  };
  expect_invalid([](RunConfig& c) { c.group_size = 1; });
  expect_invalid([](RunConfig& c) { c.epsilon = 0.0; });
  expect_invalid([](RunConfig& c) { c.beta = -0.1; });
  expect_invalid([](RunConfig& c) { c.filter_lo = 0.9; c.filter_hi = 0.1; });
  expect_invalid([](RunConfig& c) { c.temperature = 0.0; });
  expect_invalid([](RunConfig& c) { c.workers = 0; });
  expect_invalid([](RunConfig& c) { c.ppo_decay = 1.0; });
  expect_invalid([](RunConfig& c) { c.num_candidates = 1; });
  expect_invalid([](RunConfig& c) { c.reward.max_multiplier = 1.0; });
  expect_invalid([](RunConfig& c) { c.updates_per_batch = 0; });
}

TEST(ConfigTest, PpoAllowsSingleRollout) {
  RunConfig c;
  c.algorithm = Algorithm::kPpo;
  c.group_size = 1;
  EXPECT_NO_THROW(c.validate());
}

}  // namespace
}  // namespace srpo
