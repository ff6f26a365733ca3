// Copyright 2026 The srpo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SRPO_CONFIG_HPP_
#define SRPO_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "srpo/env.hpp"
#include "srpo/error.hpp"
#include "srpo/policy.hpp"
#include "srpo/response_format.hpp"
#include "srpo/reward.hpp"

namespace srpo {

enum class Stage { kSft, kRl, kBoth };
enum class Algorithm { kGrpo, kPpo };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kSft: return "sft";
    case Stage::kRl: return "rl";
    case Stage::kBoth: return "both";
  }
  return "?";
}

inline std::string_view to_string(Algorithm a) { return a == Algorithm::kGrpo ? "grpo" : "ppo"; }

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

/// Every knob of a run. Defaults are desk-scale: a 512-task environment,
/// 32 prompts per rollout batch and 8 rollouts per prompt.
struct RunConfig {
  Stage stage = Stage::kBoth;
  Algorithm algorithm = Algorithm::kGrpo;
  FormatMode mode = FormatMode::kReflective;

  std::size_t group_size = 8;
  std::size_t rollout_batch = 32;
  std::size_t epochs = 25;
  std::size_t max_steps = 0;  // 0: no cap beyond epochs
  std::size_t updates_per_batch = 1;
  double temperature = 1.0;
  double epsilon = 0.2;
  double beta = 0.0;
  RewardConfig reward;
  bool filter_enabled = true;
  double filter_lo = 0.1;
  double filter_hi = 0.9;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double learning_rate = 2.0;
  double ppo_decay = 0.99;
  std::size_t workers = 1;

  // Environment. The task sets depend only on env_seed so runs with
  // different training seeds see the same tasks.
  std::uint64_t env_seed = 2026;
  std::size_t num_tasks = 512;
  std::size_t num_candidates = 4;
  double distractor_lo = 0.2;
  double distractor_hi = 0.6;
  double reliability_lo = 1.0;
  double reliability_hi = 1.0;

  // Cold start.
  std::size_t sft_tasks = 1000;
  std::size_t sft_epochs = 1;
  double sft_learning_rate = 0.08;
  OptimizerKind sft_optimizer = OptimizerKind::kSgd;
  std::size_t sft_batch_size = 1;
  double target_correct_fraction = 0.3;

  std::string metrics_out;

  void validate() const {
    reward.validate();
    if (algorithm == Algorithm::kGrpo && group_size < 2) {
      throw InvalidConfig("group_size must be >= 2 for grpo");
    }
    if (group_size < 1 || rollout_batch < 1) throw InvalidConfig("batch sizes must be positive");
    if (updates_per_batch < 1) throw InvalidConfig("updates_per_batch must be >= 1");
    if (!(temperature > 0.0)) throw InvalidConfig("temperature must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidConfig("epsilon must lie in (0, 1)");
    if (!(beta >= 0.0)) throw InvalidConfig("beta must be >= 0");
    if (!(filter_lo >= 0.0 && filter_lo < filter_hi && filter_hi <= 1.0)) {
      throw InvalidConfig("filter bounds must satisfy 0 <= lo < hi <= 1");
    }
    if (!(ppo_decay >= 0.0 && ppo_decay < 1.0)) throw InvalidConfig("ppo_decay must lie in [0, 1)");
    if (workers < 1) throw InvalidConfig("workers must be >= 1");
    task_spec(0).validate();
  }

  TaskSetSpec task_spec(std::uint64_t set_seed) const {
    TaskSetSpec spec;
    spec.count = num_tasks;
    spec.seed = set_seed;
    spec.distractor_lo = distractor_lo;
    spec.distractor_hi = distractor_hi;
    spec.reliability_lo = reliability_lo;
    spec.reliability_hi = reliability_hi;
    spec.num_candidates = num_candidates;
    return spec;
  }
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is missing on older toolchains.
    std::string copy(text);
    char* stop = nullptr;
    value = std::strtod(copy.c_str(), &stop);
    if (copy.empty() || stop != copy.c_str() + copy.size()) {
      throw InvalidConfig(fmt::format("{}: '{}' is not a number", key, text));
    }
  } else {
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
      throw InvalidConfig(fmt::format("{}: '{}' is not a non-negative integer", key, text));
    }
  }
  return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw InvalidConfig(fmt::format("{}: '{}' is not a boolean", key, text));
}

}  // namespace detail

/// Sets one field from its `key = value` spelling. Unknown keys throw.
inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  using detail::parse_bool;
  using detail::parse_number;
  auto as_size = [&] { return parse_number<std::size_t>(key, value); };
  auto as_double = [&] { return parse_number<double>(key, value); };

  if (key == "stage") {
    if (value == "sft") c.stage = Stage::kSft;
    else if (value == "rl") c.stage = Stage::kRl;
    else if (value == "both") c.stage = Stage::kBoth;
    else throw InvalidConfig(fmt::format("stage: unknown value '{}'", value));
  } else if (key == "algorithm") {
    if (value == "grpo") c.algorithm = Algorithm::kGrpo;
    else if (value == "ppo") c.algorithm = Algorithm::kPpo;
    else throw InvalidConfig(fmt::format("algorithm: unknown value '{}'", value));
  } else if (key == "mode") {
    const auto m = parse_format_mode(value);
    if (!m) throw InvalidConfig(fmt::format("mode: unknown value '{}'", value));
    c.mode = *m;
  } else if (key == "group_size") c.group_size = as_size();
  else if (key == "rollout_batch") c.rollout_batch = as_size();
  else if (key == "epochs") c.epochs = as_size();
  else if (key == "max_steps") c.max_steps = as_size();
  else if (key == "updates_per_batch") c.updates_per_batch = as_size();
  else if (key == "temperature") c.temperature = as_double();
  else if (key == "epsilon") c.epsilon = as_double();
  else if (key == "beta") c.beta = as_double();
  else if (key == "filter_enabled") c.filter_enabled = parse_bool(key, value);
  else if (key == "filter_lo") c.filter_lo = as_double();
  else if (key == "filter_hi") c.filter_hi = as_double();
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "env_seed") c.env_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "optimizer" || key == "sft_optimizer") {
    const auto k = parse_optimizer_kind(value);
    if (!k) throw InvalidConfig(fmt::format("{}: unknown value '{}'", key, value));
    (key == "optimizer" ? c.optimizer : c.sft_optimizer) = *k;
  } else if (key == "learning_rate") c.learning_rate = as_double();
  else if (key == "ppo_decay") c.ppo_decay = as_double();
  else if (key == "workers") c.workers = as_size();
  else if (key == "num_tasks") c.num_tasks = as_size();
  else if (key == "num_candidates") c.num_candidates = as_size();
  else if (key == "distractor_lo") c.distractor_lo = as_double();
  else if (key == "distractor_hi") c.distractor_hi = as_double();
  else if (key == "reliability_lo") c.reliability_lo = as_double();
  else if (key == "reliability_hi") c.reliability_hi = as_double();
  else if (key == "sft_tasks") c.sft_tasks = as_size();
  else if (key == "sft_epochs") c.sft_epochs = as_size();
  else if (key == "sft_learning_rate") c.sft_learning_rate = as_double();
  else if (key == "sft_batch_size") c.sft_batch_size = as_size();
  else if (key == "target_correct_fraction") c.target_correct_fraction = as_double();
  else if (key == "metrics_out") c.metrics_out = std::string(value);
  else if (key == "reward.alpha") c.reward.alpha = as_double();
  else if (key == "reward.format") c.reward.format_reward = as_double();
  else if (key == "reward.accuracy") c.reward.accuracy_reward = as_double();
  else if (key == "reward.i_ref") c.reward.i_ref_value = as_double();
  else if (key == "reward.i_eff_keep") c.reward.i_eff_keep = as_double();
  else if (key == "reward.i_eff_fix") c.reward.i_eff_fix = as_double();
  else if (key == "reward.i_eff_fail") c.reward.i_eff_fail = as_double();
  else if (key == "reward.i_eff_break") c.reward.i_eff_break = as_double();
  else if (key == "reward.target_multiplier") c.reward.target_multiplier = as_double();
  else if (key == "reward.max_multiplier") c.reward.max_multiplier = as_double();
  else throw InvalidConfig(fmt::format("unknown config key '{}'", key));
}

/// Reads `key = value` lines; '#' starts a comment. Later keys win.
inline void load_config(std::istream& in, RunConfig& config) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidConfig(fmt::format("config line {}: expected 'key = value'", lineno));
    }
    try {
      apply_setting(config, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const InvalidConfig& e) {
      throw InvalidConfig(fmt::format("config line {}: {}", lineno, e.what()));
    }
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig config = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file '" + path + "'");
  load_config(in, config);
  return config;
}

}  // namespace srpo

#endif  // SRPO_CONFIG_HPP_
