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

#ifndef SRPO_REWARD_HPP_
#define SRPO_REWARD_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "srpo/error.hpp"
#include "srpo/response_format.hpp"

namespace srpo {

struct RewardConfig {
  double alpha = 0.1;  // weight of the length term
  double format_reward = 0.5;
  double accuracy_reward = 0.5;
  double i_ref_value = 0.25;
  double i_eff_keep = 0.25;   // right -> right
  double i_eff_fix = 0.5;     // wrong -> right
  double i_eff_fail = 0.0;    // wrong -> wrong
  double i_eff_break = -0.25; // right -> wrong
  double target_multiplier = 2.0;
  double max_multiplier = 2.5;

  void validate() const {
    if (!(max_multiplier > target_multiplier && target_multiplier > 1.0)) {
      throw InvalidConfig("reward: need max_multiplier > target_multiplier > 1");
    }
    if (!(alpha >= 0.0)) throw InvalidConfig("reward: alpha must be >= 0");
  }

  /// Largest r_total any response can earn. A wrong first answer forfeits
  /// the accuracy reward, so the best case keeps a correct answer.
  double max_total() const {
    const double best_eff =
        std::max(accuracy_reward + i_eff_keep, i_eff_fix);
    return format_reward + i_ref_value + best_eff + alpha;
  }
};

struct RewardBreakdown {
  double r_format = 0.0;
  double r_accuracy = 0.0;
  double i_ref = 0.0;
  double i_eff = 0.0;
  double f_len = 0.0;
  double r_task = 0.0;
  double r_reflection = 0.0;
  double r_total = 0.0;
  bool first_correct = false;
  bool second_correct = false;
};

/// Squared-exponential length shaping that peaks at `t_target`:
/// (exp(-|length - t_target| / (t_max - t_target)))^2.
inline double f_len(double length, double t_target, double t_max) {
  if (!(t_max > t_target)) throw InvalidConfig("f_len: t_max must exceed t_target");
  const double e = std::exp(-std::abs(length - t_target) / (t_max - t_target));
  return e * e;
}

inline double i_eff(bool first_correct, bool second_correct,
                    const RewardConfig& cfg = {}) {
  if (first_correct) return second_correct ? cfg.i_eff_keep : cfg.i_eff_break;
  return second_correct ? cfg.i_eff_fix : cfg.i_eff_fail;
}

/// Length targets derived from the first think block.
struct LengthTargets {
  double target;
  double max;
};

inline LengthTargets length_targets(std::size_t think1_length,
                                    const RewardConfig& cfg) {
  const double base = static_cast<double>(std::max<std::size_t>(think1_length, 1));
  return {cfg.target_multiplier * base, cfg.max_multiplier * base};
}

inline RewardBreakdown score(const StructuredResponse& response,
                             std::string_view gold, const RewardConfig& cfg,
                             FormatMode mode) {
  RewardBreakdown r;
  r.first_correct =
      response.first_answer && answers_match(*response.first_answer, gold);
  r.second_correct =
      response.second_answer && answers_match(*response.second_answer, gold);

  r.r_format = response.well_formed ? cfg.format_reward : 0.0;
  r.r_accuracy = r.first_correct ? cfg.accuracy_reward : 0.0;
  r.r_task = r.r_format + r.r_accuracy;

  if (response.well_formed) {
    switch (mode) {
      case FormatMode::kReflective: {
        const Segment* refl = response.find(SegmentKind::kReflection);
        r.i_ref = (refl != nullptr && count_tokens(refl->content) > 0)
                      ? cfg.i_ref_value
                      : 0.0;
        r.i_eff = i_eff(r.first_correct, r.second_correct, cfg);
        const LengthTargets t = length_targets(response.think1_length, cfg);
        r.f_len = f_len(static_cast<double>(response.total_length), t.target, t.max);
        break;
      }
      case FormatMode::kTwoStepThinking:
        r.i_eff = i_eff(r.first_correct, r.second_correct, cfg);
        break;
      case FormatMode::kPlain:
        break;
    }
  }
  r.r_reflection = r.i_eff + r.i_ref + cfg.alpha * r.f_len;
  r.r_total = r.r_task + r.r_reflection;
  return r;
}

}  // namespace srpo

#endif  // SRPO_REWARD_HPP_
