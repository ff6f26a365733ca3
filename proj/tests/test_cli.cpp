#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "srpo/cli.hpp"

namespace srpo {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("srpo-cli-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, Version) {
  const CliRun r = run({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "srpo 0.1.0\n");
}

TEST_F(CliTest, ScorePrintsBreakdown) {
  const CliRun r = run({"score", "--gold", "B", "--response",
                        "<think>a</think><answer>$\\boxed{C}$</answer><reflection>r</reflection>"
                        "<think>b</think><answer>$\\boxed{B}$</answer>"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("well_formed=1"), std::string::npos);
  EXPECT_NE(r.out.find("i_eff=0.5"), std::string::npos);
  EXPECT_NE(r.out.find("r_accuracy=0 "), std::string::npos);
}

TEST_F(CliTest, ForgeSftTrainEvalChain) {
  const std::string cfg = path("run.cfg");
  std::ofstream(cfg) << "max_steps = 40\n";
  CliRun r = run({"forge-data", "--config", cfg, "--out", path("sft.jsonl"), "--tasks-out", path("tasks.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("examples=1000"), std::string::npos);

  r = run({"sft", "--config", cfg, "--data", path("sft.jsonl"), "--out", path("sft.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;

  r = run({"train", "--config", cfg, "--init", path("sft.ckpt"), "--set", "stage=rl", "--metrics-out",
           path("m.csv"), "--out", path("rl.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("steps=40"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("m.csv")));

  r = run({"eval", "--config", cfg, "--checkpoint", path("rl.ckpt"), "--sampled"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("eval tasks=512"), std::string::npos);

  r = run({"eval", "--checkpoint", path("rl.ckpt"), "--tasks", path("tasks.jsonl"), "--mode", "plain"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("eval tasks=1000"), std::string::npos);
}

TEST_F(CliTest, TrainFlagsOverrideConfig) {
  const CliRun r = run({"train", "--algorithm", "ppo", "--mode", "two-step", "--seed", "3", "--set",
                        "max_steps=8", "--set", "stage=rl"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("algorithm=ppo mode=two-step seed=3 steps=8"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitTwo) {
  EXPECT_EQ(run({"train", "--mode", "sideways"}).code, 2);
  EXPECT_EQ(run({"train", "--algorithm", "dqn"}).code, 2);
  EXPECT_EQ(run({"train", "--config", path("missing.cfg")}).code, 2);
  EXPECT_EQ(run({"train", "--set", "group_size=1"}).code, 2);
  EXPECT_EQ(run({"train", "--set", "nonsense"}).code, 2);
  EXPECT_EQ(run({"train", "--seed", "abc"}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"score", "--response", "x"}).code, 2);
  EXPECT_EQ(run({"verify", "--suite", "bogus"}).code, 2);
}

TEST_F(CliTest, DataErrorsExitThree) {
  EXPECT_EQ(run({"eval", "--checkpoint", path("nope.ckpt")}).code, 3);
  std::ofstream(path("bad.ckpt")) << "# srpo tabular policy v1\nschema_hash = 0000000000000000\n";
  EXPECT_EQ(run({"eval", "--checkpoint", path("bad.ckpt")}).code, 3);
  std::ofstream(path("bad.jsonl")) << "{not json\n";
  EXPECT_EQ(run({"sft", "--data", path("bad.jsonl"), "--out", path("x.ckpt")}).code, 3);
  EXPECT_EQ(run({"eval", "--tasks", path("bad.jsonl")}).code, 3);
  std::ofstream(path("empty.jsonl")) << "{\"task_id\": 0, \"reflection\": \"\"}\n";
  EXPECT_EQ(run({"forge-data", "--reflections", path("empty.jsonl"), "--out", path("o.jsonl")}).code, 3);
}

TEST_F(CliTest, VerifyFormulasSuitePasses) {
  const CliRun r = run({"verify", "--suite", "formulas"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("result=pass"), std::string::npos);
  std::size_t lines = 0;
  for (char c : r.out) lines += c == '\n' ? 1 : 0;
  EXPECT_EQ(lines, 8u);
}

}  // namespace
}  // namespace srpo
