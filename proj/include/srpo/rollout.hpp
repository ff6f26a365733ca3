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

// Binds the tabular policy to the task environment: the decision slots a
// response is made of, how contexts are formed, and one sampled episode
// (decisions -> text -> parse -> reward).

#ifndef SRPO_ROLLOUT_HPP_
#define SRPO_ROLLOUT_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "srpo/env.hpp"
#include "srpo/policy.hpp"
#include "srpo/random.hpp"
#include "srpo/response_format.hpp"
#include "srpo/reward.hpp"

namespace srpo {

// Slot layout shared by every format mode; a mode samples a subset.
namespace slot {
inline constexpr std::size_t kFormatThink1 = 0;
inline constexpr std::size_t kFormatAnswer1 = 1;
inline constexpr std::size_t kFormatReflection = 2;
inline constexpr std::size_t kFormatThink2 = 3;
inline constexpr std::size_t kFormatAnswer2 = 4;
inline constexpr std::size_t kFirstAnswer = 5;
inline constexpr std::size_t kReflectionStyle = 6;
inline constexpr std::size_t kRevise = 7;
inline constexpr std::size_t kCount = 8;
}  // namespace slot

inline constexpr std::size_t kTagged = 0;
inline constexpr std::size_t kBare = 1;
inline constexpr std::size_t kKeep = 0;  // revise choice 1 + k switches to option k

/// Schema for tasks with `num_candidates` options.
///
///  format.*          {tagged, bare}, one context
///  first_answer      option index, conditioned on the cued option
///  reflection_style  {empty, brief, verbose}, one context
///  revise            {keep, switch_k...}, conditioned on the self-check
///                    signal surfaced by a nonempty reflection, or "blind"
inline std::shared_ptr<const DecisionSchema> make_schema(std::size_t num_candidates) {
  std::vector<std::string> options;
  std::vector<std::string> cues;
  for (std::size_t k = 0; k < num_candidates; ++k) {
    options.push_back(fmt::format("opt{}", k));
    cues.push_back(fmt::format("cue={}", k));
  }
  std::vector<std::string> revise_choices = {"keep"};
  std::vector<std::string> revise_contexts = {"blind"};
  for (std::size_t k = 0; k < num_candidates; ++k) revise_choices.push_back(fmt::format("switch{}", k));
  for (const char* verdict : {"ok", "wrong"}) {
    for (std::size_t k = 0; k < num_candidates; ++k) {
      revise_contexts.push_back(fmt::format("{}/hint={}", verdict, k));
    }
  }
  const std::vector<std::string> tag_choices = {"tagged", "bare"};
  const std::vector<std::string> one = {"*"};
  std::vector<SlotSpec> slots = {
      {"format.think1", tag_choices, one},
      {"format.answer1", tag_choices, one},
      {"format.reflection", tag_choices, one},
      {"format.think2", tag_choices, one},
      {"format.answer2", tag_choices, one},
      {"first_answer", options, cues},
      {"reflection_style", {"empty", "brief", "verbose"}, one},
      {"revise", revise_choices, revise_contexts},
  };
  return std::make_shared<const DecisionSchema>(std::move(slots));
}

inline std::size_t num_candidates_of(const DecisionSchema& schema) {
  return schema.slot(slot::kFirstAnswer).choices.size();
}

inline bool slot_active(std::size_t s, FormatMode mode) {
  switch (mode) {
    case FormatMode::kReflective: return true;
    case FormatMode::kTwoStepThinking:
      return s != slot::kFormatReflection && s != slot::kReflectionStyle;
    case FormatMode::kPlain:
      return s == slot::kFormatThink1 || s == slot::kFormatAnswer1 || s == slot::kFirstAnswer;
  }
  return false;
}

/// Context index of the revise slot. 0 is "blind"; otherwise the verdict and
/// hinted option of the self-check.
inline std::size_t revise_context(const std::optional<CheckSignal>& signal,
                                  std::size_t num_candidates) {
  if (!signal) return 0;
  return 1 + (signal->says_correct ? 0 : num_candidates) + signal->hint;
}

/// Per-domain think templates. Each first think block is 40 tokens, so a
/// response with a brief reflection lands near twice that length.
inline RenderTemplates templates_for(const Task& task) {
  RenderTemplates t;
  switch (task.domain_tag) {
    case DomainTag::kArith:
      t.think1 =
          "Read the two addends, add the ones digits first and carry when the "
          "sum passes nine, then add the tens digits together with the carry, and compare the "
          "resulting sum with each of the listed options to settle on {answer}.";
      break;
    case DomainTag::kGeometryLike:
      t.think1 =
          "Supplementary angles add up to one hundred and eighty degrees, so subtract the given "
          "measure of angle one from one hundred and eighty, then check the difference against "
          "each of the listed options and keep the one that matches: {answer}.";
      break;
    case DomainTag::kChartLike:
      t.think1 =
          "Read every bar of the chart in the listed order, keep track of the largest value seen "
          "while moving from left to right, replace it whenever a taller bar appears, and "
          "match the tallest bar with the listed options: {answer}.";
      break;
  }
  t.reflection_brief = "The first answer should be checked against the options once more.";
  t.think2 = "Following the reflection, the options were compared again, giving {answer}.";
  return t;
}

struct Episode {
  std::vector<Decision> decisions;
  std::size_t first_index = 0;
  std::optional<std::size_t> second_index;
  std::optional<ReflectionStyle> style;
  std::optional<CheckSignal> signal;
  std::string text;
  StructuredResponse response;
  RewardBreakdown reward;
  bool final_correct = false;
};

/// Samples one response for `task` (or takes argmaxes when `greedy`),
/// renders it, parses it under `mode` and scores it. Policy randomness and
/// self-check randomness use separate streams derived from `seed`.
inline Episode play_episode(const TabularPolicy& policy, const Task& task, FormatMode mode,
                            const RewardConfig& reward_cfg, std::uint64_t seed,
                            bool greedy = false) {
  const DecisionSchema& schema = policy.schema();
  const std::size_t k = num_candidates_of(schema);
  if (task.candidate_answers.size() != k) {
    throw UnknownContext(fmt::format("task {} has {} candidates; policy expects {}", task.task_id,
                                     task.candidate_answers.size(), k));
  }
  Rng policy_rng(derive_seed({seed, 1}));
  Rng env_rng(derive_seed({seed, 2}));

  Episode ep;
  auto context_of = [&](std::size_t s, std::span<const Decision> so_far) -> std::optional<std::size_t> {
    if (!slot_active(s, mode)) return std::nullopt;
    if (s == slot::kFirstAnswer) return task.cue_index;
    if (s == slot::kRevise) {
      std::size_t first = 0;
      bool reflected = false;
      for (const Decision& d : so_far) {
        const std::size_t ds = schema.row_slot(d.row);
        if (ds == slot::kFirstAnswer) first = d.choice;
        if (ds == slot::kReflectionStyle) reflected = d.choice != 0;
      }
      if (mode == FormatMode::kReflective && reflected) {
        ep.signal = self_check(task, first, env_rng);
      }
      return revise_context(ep.signal, k);
    }
    return 0;
  };
  ep.decisions = sample(policy, context_of, policy_rng, greedy);

  RenderDecisions rd;
  for (const Decision& d : ep.decisions) {
    const std::size_t s = schema.row_slot(d.row);
    if (s <= slot::kFormatAnswer2) {
      rd.bare[s] = d.choice == kBare;
    } else if (s == slot::kFirstAnswer) {
      ep.first_index = d.choice;
    } else if (s == slot::kReflectionStyle) {
      ep.style = static_cast<ReflectionStyle>(d.choice);
    } else if (s == slot::kRevise) {
      ep.second_index = d.choice == kKeep ? ep.first_index : d.choice - 1;
    }
  }
  rd.first_answer = task.candidate_answers[ep.first_index];
  rd.reflection_style = ep.style;
  if (ep.second_index) rd.second_answer = task.candidate_answers[*ep.second_index];

  ep.text = render(rd, mode, templates_for(task));
  ep.response = parse(ep.text, mode);
  ep.reward = score(ep.response, task.gold_answer, reward_cfg, mode);
  ep.final_correct = mode == FormatMode::kPlain ? ep.reward.first_correct : ep.reward.second_correct;
  return ep;
}

}  // namespace srpo

#endif  // SRPO_ROLLOUT_HPP_
