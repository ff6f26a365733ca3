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

// Two-stage training: cold-start SFT, then group-relative policy
// optimization over sampled reflective responses, with per-step metrics.

#ifndef SRPO_TRAINER_HPP_
#define SRPO_TRAINER_HPP_

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "srpo/config.hpp"
#include "srpo/env.hpp"
#include "srpo/grpo_math.hpp"
#include "srpo/policy.hpp"
#include "srpo/rollout.hpp"
#include "srpo/sft.hpp"

namespace srpo {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// handled exactly once; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct StepMetrics {
  std::size_t step = 0;    // optimization step, monotone
  std::size_t batch = 0;   // rollout batch (old-policy snapshot)
  std::size_t update = 0;  // index of this update within its batch
  double mean_reward = 0.0;
  double mean_accuracy_reward = 0.0;
  double mean_response_length = 0.0;
  double mean_correct_length = 0.0;
  double mean_incorrect_length = 0.0;
  double ratio_clip_upper = 0.0;
  double ratio_clip_lower = 0.0;
  double mean_ratio = 1.0;
  double policy_loss = 0.0;
  double kl = 0.0;
  std::size_t ieff_keep = 0;
  std::size_t ieff_fix = 0;
  std::size_t ieff_fail = 0;
  std::size_t ieff_break = 0;
  double first_accuracy = 0.0;
  double post_reflection_accuracy = 0.0;
  double format_validity = 0.0;
  std::size_t groups_total = 0;
  std::size_t groups_retained = 0;
  bool skipped = false;
};

inline constexpr std::string_view kMetricsHeader =
    "step,batch,update,mean_reward,mean_accuracy_reward,mean_response_length,"
    "mean_correct_length,mean_incorrect_length,ratio_clip_upper,ratio_clip_lower,"
    "mean_ratio,policy_loss,kl,ieff_keep,ieff_fix,ieff_fail,ieff_break,first_accuracy,"
    "post_reflection_accuracy,format_validity,groups_total,groups_retained,skipped";

struct TrainMetrics {
  std::vector<StepMetrics> steps;

  void write_csv(std::ostream& out) const {
    out << kMetricsHeader << '\n';
    for (const StepMetrics& m : steps) {
      out << fmt::format(
          "{},{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},"
          "{},{},{},{},{:.10g},{:.10g},{:.10g},{},{},{}\n",
          m.step, m.batch, m.update, m.mean_reward, m.mean_accuracy_reward, m.mean_response_length,
          m.mean_correct_length, m.mean_incorrect_length, m.ratio_clip_upper, m.ratio_clip_lower,
          m.mean_ratio, m.policy_loss, m.kl, m.ieff_keep, m.ieff_fix, m.ieff_fail, m.ieff_break,
          m.first_accuracy, m.post_reflection_accuracy, m.format_validity, m.groups_total,
          m.groups_retained, m.skipped ? 1 : 0);
    }
  }

  /// First step whose rollouts reach `threshold` final-answer accuracy.
  std::optional<std::size_t> first_step_reaching(double threshold) const {
    for (const StepMetrics& m : steps)
      if (m.post_reflection_accuracy >= threshold) return m.step;
    return std::nullopt;
  }
};

/// Exponential moving average of rewards per prompt family. A family's
/// baseline starts at the mean of its first batch.
class EmaBaseline {
 public:
  explicit EmaBaseline(double decay) : decay_(decay) {}

  std::optional<double> value(std::uint64_t family) const {
    const auto it = values_.find(family);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  void update(std::uint64_t family, double batch_mean) {
    const auto it = values_.find(family);
    if (it == values_.end()) {
      values_.emplace(family, batch_mean);
    } else {
      it->second = decay_ * it->second + (1.0 - decay_) * batch_mean;
    }
  }

 private:
  double decay_;
  std::map<std::uint64_t, double> values_;
};

struct RlResult {
  TabularPolicy policy;
  TrainMetrics metrics;
};

namespace detail {

inline void fill_rollout_stats(StepMetrics& m, std::span<const std::vector<Episode>> episodes,
                               FormatMode mode) {
  std::size_t n = 0, first = 0, final_ok = 0, valid = 0, n_correct = 0;
  double reward = 0.0, acc = 0.0, len = 0.0, len_correct = 0.0, len_wrong = 0.0;
  for (const auto& group : episodes) {
    for (const Episode& ep : group) {
      ++n;
      reward += ep.reward.r_total;
      acc += ep.reward.r_accuracy;
      const double l = static_cast<double>(ep.response.total_length);
      len += l;
      first += ep.reward.first_correct ? 1 : 0;
      if (ep.final_correct) {
        ++final_ok;
        ++n_correct;
        len_correct += l;
      } else {
        len_wrong += l;
      }
      if (ep.response.well_formed) {
        ++valid;
        if (mode != FormatMode::kPlain) {
          const bool a = ep.reward.first_correct;
          const bool b = ep.reward.second_correct;
          if (a && b) ++m.ieff_keep;
          else if (!a && b) ++m.ieff_fix;
          else if (!a && !b) ++m.ieff_fail;
          else ++m.ieff_break;
        }
      }
    }
  }
  if (n == 0) return;
  const double dn = static_cast<double>(n);
  m.mean_reward = reward / dn;
  m.mean_accuracy_reward = acc / dn;
  m.mean_response_length = len / dn;
  m.mean_correct_length = n_correct ? len_correct / static_cast<double>(n_correct) : 0.0;
  m.mean_incorrect_length = n > n_correct ? len_wrong / static_cast<double>(n - n_correct) : 0.0;
  m.first_accuracy = static_cast<double>(first) / dn;
  m.post_reflection_accuracy = static_cast<double>(final_ok) / dn;
  m.format_validity = static_cast<double>(valid) / dn;
}

}  // namespace detail

/// RL stage. Each rollout batch samples group_size responses per prompt from
/// a frozen snapshot of the policy, scores them, filters groups by accuracy,
/// computes advantages (group-normalized for grpo, EMA baseline per domain
/// for ppo) and takes updates_per_batch optimizer steps on the clipped
/// objective. The KL reference is the policy passed in.
inline RlResult run_rl(const RunConfig& config, std::span<const Task> tasks, TabularPolicy policy) {
  config.validate();
  if (tasks.empty()) throw InvalidConfig("run_rl: no tasks");
  policy.set_temperature(config.temperature);
  const TabularPolicy reference = policy;
  Optimizer optimizer(config.optimizer, config.learning_rate);
  EmaBaseline baseline(config.ppo_decay);

  const std::size_t per_epoch = (tasks.size() + config.rollout_batch - 1) / config.rollout_batch;
  const std::size_t total_batches = per_epoch * config.epochs;
  const std::size_t step_budget =
      config.max_steps > 0 ? config.max_steps : std::numeric_limits<std::size_t>::max();

  RlResult result{std::move(policy), {}};
  TabularPolicy& current = result.policy;
  std::vector<std::size_t> order(tasks.size());
  std::size_t step = 0;

  for (std::size_t b = 0; b < total_batches && step < step_budget; ++b) {
    if (b % per_epoch == 0) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed({config.seed, 0x65706f6368ULL, b / per_epoch}));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    const std::size_t begin = (b % per_epoch) * config.rollout_batch;
    const std::size_t end = std::min(tasks.size(), begin + config.rollout_batch);
    const std::size_t prompts = end - begin;

    const TabularPolicy old = current;
    std::vector<std::vector<Episode>> episodes(prompts);
    parallel_for(prompts, config.workers, [&](std::size_t p) {
      const Task& task = tasks[order[begin + p]];
      episodes[p].reserve(config.group_size);
      for (std::size_t m = 0; m < config.group_size; ++m) {
        episodes[p].push_back(play_episode(old, task, config.mode, config.reward,
                                           derive_seed({config.seed, b, task.task_id, m})));
      }
    });

    StepMetrics base;
    base.batch = b;
    base.groups_total = prompts;
    detail::fill_rollout_stats(base, episodes, config.mode);

    std::vector<RolloutGroup> groups(prompts);
    for (std::size_t p = 0; p < prompts; ++p) {
      groups[p].prompt_id = tasks[order[begin + p]].task_id;
      for (Episode& ep : episodes[p]) {
        Rollout r;
        r.decisions = std::move(ep.decisions);
        r.reward = ep.reward.r_total;
        r.correct = ep.final_correct;
        groups[p].members.push_back(std::move(r));
      }
    }

    // Baselines for ppo come from the pre-filter batch.
    std::map<std::uint64_t, std::pair<double, std::size_t>> family_rewards;
    std::vector<std::uint64_t> family_of(prompts);
    if (config.algorithm == Algorithm::kPpo) {
      for (std::size_t p = 0; p < prompts; ++p) {
        family_of[p] = static_cast<std::uint64_t>(tasks[order[begin + p]].domain_tag);
        auto& acc = family_rewards[family_of[p]];
        for (const Rollout& r : groups[p].members) {
          acc.first += r.reward;
          ++acc.second;
        }
      }
      for (std::size_t p = 0; p < prompts; ++p) {
        const auto& acc = family_rewards[family_of[p]];
        const double b0 = baseline.value(family_of[p]).value_or(acc.first / static_cast<double>(acc.second));
        for (Rollout& r : groups[p].members) r.advantage = r.reward - b0;
      }
      for (const auto& [family, acc] : family_rewards) {
        baseline.update(family, acc.first / static_cast<double>(acc.second));
      }
    }

    std::vector<RolloutGroup> kept =
        config.filter_enabled ? accuracy_filter(groups, config.filter_lo, config.filter_hi) : groups;
    base.groups_retained = kept.size();
    if (kept.empty()) {
      StepMetrics m = base;
      m.step = step++;
      m.skipped = true;
      result.metrics.steps.push_back(m);
      continue;
    }
    if (config.algorithm == Algorithm::kGrpo) {
      for (RolloutGroup& g : kept) assign_advantages(g);
    }

    for (std::size_t u = 0; u < config.updates_per_batch && step < step_budget; ++u) {
      ObjectiveResult obj = objective(kept, current, reference, config.epsilon, config.beta);
      for (double& g : obj.gradient) g = -g;
      optimizer.step(current, obj.gradient);

      StepMetrics m = base;
      m.step = step++;
      m.update = u;
      m.ratio_clip_upper = obj.clip.ratio_clip_upper_frac;
      m.ratio_clip_lower = obj.clip.ratio_clip_lower_frac;
      m.mean_ratio = obj.clip.mean_ratio;
      m.policy_loss = -obj.value;
      m.kl = obj.kl;
      result.metrics.steps.push_back(m);
    }
  }
  return result;
}

/// Same loop with the single-trajectory EMA baseline instead of group
/// normalization.
inline RlResult run_ppo_baseline(RunConfig config, std::span<const Task> tasks, TabularPolicy policy) {
  config.algorithm = Algorithm::kPpo;
  return run_rl(config, tasks, std::move(policy));
}

struct EvalOptions {
  bool greedy = true;
  std::uint64_t seed = 0;
  RewardConfig reward;
};

struct EvalSummary {
  std::size_t tasks = 0;
  double first_accuracy = 0.0;
  std::optional<double> second_accuracy;  // absent in plain mode
  double final_accuracy = 0.0;
  double format_validity = 0.0;
  std::array<std::size_t, 4> ieff_counts{};  // keep, fix, fail, break
  double correction_rate = 0.0;  // wrong first answers fixed by the second
  double mean_length = 0.0;
  double mean_reward = 0.0;
};

/// Read-only pass over `tasks`; argmax decoding unless options.greedy is off.
inline EvalSummary evaluate(const TabularPolicy& policy, std::span<const Task> tasks, FormatMode mode,
                            const EvalOptions& options = {}) {
  EvalSummary s;
  s.tasks = tasks.size();
  if (tasks.empty()) return s;
  std::size_t first = 0, second = 0, valid = 0, wrong_first = 0, fixed = 0;
  double len = 0.0, reward = 0.0;
  for (const Task& task : tasks) {
    const Episode ep = play_episode(policy, task, mode, options.reward,
                                    derive_seed({options.seed, 0x6576616cULL, task.task_id}), options.greedy);
    first += ep.reward.first_correct ? 1 : 0;
    second += ep.reward.second_correct ? 1 : 0;
    len += static_cast<double>(ep.response.total_length);
    reward += ep.reward.r_total;
    if (ep.response.well_formed) {
      ++valid;
      if (mode != FormatMode::kPlain) {
        const bool a = ep.reward.first_correct, b = ep.reward.second_correct;
        ++s.ieff_counts[a && b ? 0 : (!a && b ? 1 : (!a && !b ? 2 : 3))];
      }
    }
    if (!ep.reward.first_correct) {
      ++wrong_first;
      fixed += ep.reward.second_correct ? 1 : 0;
    }
  }
  const double n = static_cast<double>(tasks.size());
  s.first_accuracy = static_cast<double>(first) / n;
  if (mode != FormatMode::kPlain) s.second_accuracy = static_cast<double>(second) / n;
  s.final_accuracy = s.second_accuracy.value_or(s.first_accuracy);
  s.format_validity = static_cast<double>(valid) / n;
  s.correction_rate =
      (mode != FormatMode::kPlain && wrong_first > 0) ? static_cast<double>(fixed) / static_cast<double>(wrong_first) : 0.0;
  s.mean_length = len / n;
  s.mean_reward = reward / n;
  return s;
}

struct PipelineResult {
  TabularPolicy policy;
  std::vector<Task> rl_tasks;
  std::optional<ForgeReport> forge_report;
  std::vector<double> sft_loss;
  TrainMetrics metrics;
};

inline std::vector<Task> rl_task_set(const RunConfig& config) {
  return generate(config.task_spec(derive_seed({config.env_seed, 1})));
}

inline std::vector<Task> sft_task_set(const RunConfig& config) {
  TaskSetSpec spec = config.task_spec(derive_seed({config.env_seed, 2}));
  spec.count = config.sft_tasks;
  return generate(spec);
}

/// Forge + cold start from `initial`. The uniform initial policy stands in
/// for the untrained model that writes the first attempts.
inline SftResult run_cold_start(const RunConfig& config, const TabularPolicy& initial,
                                std::optional<ForgeReport>* report = nullptr) {
  const std::vector<Task> tasks = sft_task_set(config);
  OracleReflectionSource source;
  ForgeOptions fo;
  fo.target_correct_fraction = config.target_correct_fraction;
  fo.seed = config.seed;
  ForgeResult forged = forge(tasks, initial, source, fo);
  if (report) *report = forged.report;
  SftOptions so;
  so.epochs = config.sft_epochs;
  so.learning_rate = config.sft_learning_rate;
  so.optimizer = config.sft_optimizer;
  so.batch_size = config.sft_batch_size;
  so.seed = config.seed;
  return cold_start_train(initial, forged.examples, tasks, so);
}

/// Runs the configured stages. Without `initial`, starts from a uniform
/// policy over the schema for config.num_candidates options.
inline PipelineResult run_pipeline(const RunConfig& config,
                                   std::optional<TabularPolicy> initial = std::nullopt) {
  config.validate();
  TabularPolicy policy =
      initial ? *initial : TabularPolicy(make_schema(config.num_candidates), config.temperature);
  PipelineResult out{policy, rl_task_set(config), std::nullopt, {}, {}};
  if (config.stage != Stage::kRl) {
    SftResult sft = run_cold_start(config, policy, &out.forge_report);
    out.sft_loss = sft.loss_trace;
    out.policy = std::move(sft.policy);
  }
  if (config.stage != Stage::kSft) {
    RlResult rl = run_rl(config, out.rl_tasks, out.policy);
    out.policy = std::move(rl.policy);
    out.metrics = std::move(rl.metrics);
  }
  return out;
}

}  // namespace srpo

#endif  // SRPO_TRAINER_HPP_
