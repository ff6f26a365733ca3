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

// Group-relative advantages, the clipped surrogate objective with a k3 KL
// penalty, and accuracy filtering of rollout groups.

#ifndef SRPO_GRPO_MATH_HPP_
#define SRPO_GRPO_MATH_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "srpo/error.hpp"
#include "srpo/policy.hpp"

namespace srpo {

struct Rollout {
  std::vector<Decision> decisions;  // logp holds the old-policy log-prob
  double reward = 0.0;
  bool correct = false;  // final answer matches gold
  double advantage = 0.0;
};

struct RolloutGroup {
  std::uint64_t prompt_id = 0;
  std::vector<Rollout> members;

  std::size_t size() const { return members.size(); }
};

struct AdvantageSet {
  std::vector<double> advantages;
  double group_mean = 0.0;
  double group_std = 0.0;
  bool degenerate = false;
};

inline constexpr double kDegenerateStd = 1e-8;

/// (r_i - mean) / std with the population standard deviation. Groups whose
/// std falls below 1e-8 get all-zero advantages.
inline AdvantageSet advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw GroupTooSmall(fmt::format("group of {} rollouts; need at least 2", rewards.size()));
  }
  AdvantageSet out;
  const double n = static_cast<double>(rewards.size());
  double sum = 0.0;
  for (double r : rewards) sum += r;
  out.group_mean = sum / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - out.group_mean) * (r - out.group_mean);
  out.group_std = std::sqrt(sq / n);
  out.degenerate = out.group_std < kDegenerateStd;
  out.advantages.resize(rewards.size(), 0.0);
  if (!out.degenerate) {
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      out.advantages[i] = (rewards[i] - out.group_mean) / out.group_std;
    }
  }
  return out;
}

inline AdvantageSet advantages(const RolloutGroup& group) {
  std::vector<double> rewards;
  rewards.reserve(group.size());
  for (const Rollout& r : group.members) rewards.push_back(r.reward);
  return advantages(rewards);
}

inline AdvantageSet assign_advantages(RolloutGroup& group) {
  AdvantageSet set = advantages(group);
  for (std::size_t i = 0; i < group.size(); ++i) {
    group.members[i].advantage = set.advantages[i];
  }
  return set;
}

inline double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

inline constexpr double kKlLogRatioBound = 20.0;

/// k3 estimator u - log(u) - 1 with u = pi_ref / pi_current.
inline double kl_k3(double logp_current, double logp_ref) {
  const double d =
      std::clamp(logp_ref - logp_current, -kKlLogRatioBound, kKlLogRatioBound);
  return std::exp(d) - d - 1.0;
}

struct ClipStats {
  double ratio_clip_upper_frac = 0.0;
  double ratio_clip_lower_frac = 0.0;
  double mean_ratio = 1.0;
  double kl_value = 0.0;
};

struct ObjectiveResult {
  double value = 0.0;      // surrogate - beta * kl
  double surrogate = 0.0;
  double kl = 0.0;
  std::vector<double> gradient;  // d value / d params
  ClipStats clip;
  std::size_t num_slots = 0;
};

template <class P>
concept ScorePolicy = requires(const P& p, std::size_t row, std::size_t choice,
                               double w, std::span<double> g) {
  { p.log_prob(row, choice) } -> std::convertible_to<double>;
  { p.num_params() } -> std::convertible_to<std::size_t>;
  p.accumulate_grad_log_prob(row, choice, w, g);
};

/// Clipped surrogate with a beta-weighted k3 penalty against `ref`, averaged
/// per response over its decision slots, then over members, then over
/// groups. Members must carry advantages already. The gradient is exact.
template <ScorePolicy P>
ObjectiveResult objective(std::span<const RolloutGroup> groups, const P& current,
                          const P& ref, double epsilon, double beta) {
  ObjectiveResult out;
  out.gradient.assign(current.num_params(), 0.0);
  std::size_t upper = 0;
  std::size_t lower = 0;
  double ratio_sum = 0.0;

  std::size_t live_groups = 0;
  for (const RolloutGroup& g : groups)
    if (!g.members.empty()) ++live_groups;
  if (live_groups == 0) return out;

  for (const RolloutGroup& g : groups) {
    if (g.members.empty()) continue;
    const double group_w = 1.0 / (static_cast<double>(live_groups) *
                                  static_cast<double>(g.members.size()));
    for (const Rollout& member : g.members) {
      if (member.decisions.empty()) continue;
      const double w = group_w / static_cast<double>(member.decisions.size());
      const double a = member.advantage;
      for (const Decision& d : member.decisions) {
        const double logp = current.log_prob(d.row, d.choice);
        const double ratio = std::exp(logp - d.logp);
        ++out.num_slots;
        ratio_sum += ratio;
        if (ratio > 1.0 + epsilon) ++upper;
        if (ratio < 1.0 - epsilon) ++lower;

        const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
        const double unclipped_term = ratio * a;
        const double clipped_term = clipped * a;
        out.surrogate += w * std::min(unclipped_term, clipped_term);
        // The clipped branch is constant in theta.
        double coeff = unclipped_term <= clipped_term ? a * ratio : 0.0;

        if (beta != 0.0) {
          const double logp_ref = ref.log_prob(d.row, d.choice);
          out.kl += w * kl_k3(logp, logp_ref);
          const double diff = logp_ref - logp;
          if (diff > -kKlLogRatioBound && diff < kKlLogRatioBound) {
            coeff -= beta * (1.0 - std::exp(diff));
          }
        }
        if (coeff != 0.0) {
          current.accumulate_grad_log_prob(d.row, d.choice, w * coeff, out.gradient);
        }
      }
    }
  }
  out.value = out.surrogate - beta * out.kl;
  if (out.num_slots > 0) {
    const double n = static_cast<double>(out.num_slots);
    out.clip.ratio_clip_upper_frac = static_cast<double>(upper) / n;
    out.clip.ratio_clip_lower_frac = static_cast<double>(lower) / n;
    out.clip.mean_ratio = ratio_sum / n;
  }
  out.clip.kl_value = out.kl;
  return out;
}

inline double group_accuracy(const RolloutGroup& group) {
  if (group.members.empty()) return 0.0;
  std::size_t correct = 0;
  for (const Rollout& r : group.members) correct += r.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(group.members.size());
}

/// Keeps groups whose member accuracy lies in [lo, hi].
inline std::vector<RolloutGroup> accuracy_filter(std::span<const RolloutGroup> groups,
                                                 double lo = 0.1, double hi = 0.9) {
  if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) {
    throw InvalidConfig("accuracy_filter: need 0 <= lo < hi <= 1");
  }
  std::vector<RolloutGroup> kept;
  for (const RolloutGroup& g : groups) {
    if (g.members.empty()) continue;
    const double acc = group_accuracy(g);
    if (acc >= lo && acc <= hi) kept.push_back(g);
  }
  return kept;
}

}  // namespace srpo

#endif  // SRPO_GRPO_MATH_HPP_
