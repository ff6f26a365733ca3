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

// Reflection-oriented cold-start data and training. The forge samples a
// first attempt per task, grades it, asks a reflection source to critique it
// and assembles (first attempt, reflection, ground truth) examples.
// cold_start_train maximizes the joint log-likelihood of that sequence.

#ifndef SRPO_SFT_HPP_
#define SRPO_SFT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "srpo/env.hpp"
#include "srpo/error.hpp"
#include "srpo/policy.hpp"
#include "srpo/random.hpp"
#include "srpo/response_format.hpp"
#include "srpo/rollout.hpp"

namespace srpo {

struct SftExample {
  std::uint64_t task_id = 0;
  std::string question;
  std::optional<std::string> image_ref;
  std::string initial_response;  // first attempt, Plain-mode text
  std::string first_answer;
  std::string reflection;
  std::string ground_truth_answer;
  bool initially_correct = false;

  std::string first_think() const {
    const StructuredResponse r = parse(initial_response, FormatMode::kPlain);
    const Segment* t = r.find(SegmentKind::kThink1);
    return t ? t->content : std::string();
  }

  /// Full reflective training string: the first attempt, the reflection,
  /// and a second pass that states the ground truth.
  std::string assemble() const {
    return fmt::format(
        "{}\n<reflection> {} </reflection>\n<think> Following the reflection, the answer is {}. "
        "</think>\n<answer> The answer is $\\boxed{{{}}}$. </answer>",
        initial_response, reflection, ground_truth_answer, ground_truth_answer);
  }

  /// Assistant turn in the SFT dataset layout (no second think block).
  std::string assistant_content() const {
    return fmt::format(
        "<think>{}</think>\n<answer>$\\boxed{{{}}}$</answer>\n<reflection>{}</reflection>\n"
        "<answer>$\\boxed{{{}}}$</answer>",
        first_think(), first_answer, reflection, ground_truth_answer);
  }
};

struct ForgeReport {
  std::size_t total = 0;
  double correct_fraction = 0.0;
  std::size_t dropped = 0;
  std::map<std::string, std::size_t> drop_reasons;
};

struct ForgeResult {
  std::vector<SftExample> examples;
  ForgeReport report;
};

class ReflectionSource {
 public:
  virtual ~ReflectionSource() = default;
  virtual std::string reflect(const Task& task, std::string_view first_answer) = 0;
};

/// Ground-truth-aware template reflections.
class OracleReflectionSource : public ReflectionSource {
 public:
  explicit OracleReflectionSource(ReflectionStyle style = ReflectionStyle::kBrief) : style_(style) {}

  std::string reflect(const Task& task, std::string_view first_answer) override {
    return oracle_reflection(task, first_answer, style_);
  }

 private:
  ReflectionStyle style_;
};

/// Pre-generated reflections keyed by task id, one JSON object per line:
/// {"task_id": 3, "reflection": "..."}. Tasks without an entry get "".
class FileReflectionSource : public ReflectionSource {
 public:
  explicit FileReflectionSource(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        by_task_[j.at("task_id").get<std::uint64_t>()] = j.at("reflection").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("reflections line {}: {}", lineno, e.what()));
      }
    }
  }

  std::string reflect(const Task& task, std::string_view) override {
    const auto it = by_task_.find(task.task_id);
    return it == by_task_.end() ? std::string() : it->second;
  }

 private:
  std::unordered_map<std::uint64_t, std::string> by_task_;
};

/// Reflection class the tabular policy learns: empty, brief (<= 20 tokens)
/// or verbose.
inline ReflectionStyle classify_reflection(std::string_view text) {
  const std::size_t n = count_tokens(text);
  if (n == 0) return ReflectionStyle::kEmpty;
  return n <= 20 ? ReflectionStyle::kBrief : ReflectionStyle::kVerbose;
}

inline bool default_quality_filter(const SftExample& ex) {
  return count_tokens(ex.reflection) > 0 && parse(ex.assemble(), FormatMode::kReflective).well_formed;
}

struct ForgeOptions {
  double target_correct_fraction = 0.3;
  double tolerance = 0.05;
  std::uint64_t seed = 0;
  std::size_t retry_budget = 64;
  std::function<bool(const SftExample&)> quality_filter = default_quality_filter;
};

/// Builds one example per task where possible. Attempts are drawn until the
/// attempt's correctness matches a running quota for the target fraction;
/// tasks that exhaust the retry budget are dropped. Throws
/// InsufficientDiversity when the surviving mix misses the target band.
inline ForgeResult forge(std::span<const Task> tasks, const TabularPolicy& policy,
                         ReflectionSource& source, const ForgeOptions& options = {}) {
  if (tasks.empty()) throw InvalidConfig("forge: no tasks");
  const DecisionSchema& schema = policy.schema();
  ForgeResult out;
  std::size_t correct = 0;
  auto drop = [&out](const std::string& reason) {
    ++out.report.dropped;
    ++out.report.drop_reasons[reason];
  };

  for (const Task& task : tasks) {
    const bool want_correct =
        static_cast<double>(correct) <
        options.target_correct_fraction * static_cast<double>(out.examples.size() + 1) - 1e-12;
    const std::size_t gold = task.gold_index();
    const std::size_t row = schema.row(slot::kFirstAnswer, task.cue_index);
    std::optional<std::size_t> first;
    for (std::size_t attempt = 0; attempt < options.retry_budget; ++attempt) {
      Rng rng(derive_seed({options.seed, 0x666f7267ULL, task.task_id, attempt}));
      const std::size_t c = policy.sample_choice(row, rng);
      if ((c == gold) == want_correct) {
        first = c;
        break;
      }
    }
    if (!first) {
      drop("retry_budget_exhausted");
      continue;
    }

    SftExample ex;
    ex.task_id = task.task_id;
    ex.question = task.question_text;
    ex.image_ref = fmt::format("synthetic://task/{}", task.task_id);
    ex.first_answer = task.candidate_answers[*first];
    ex.ground_truth_answer = task.gold_answer;
    ex.initially_correct = *first == gold;
    RenderDecisions rd;
    rd.first_answer = ex.first_answer;
    ex.initial_response = render(rd, FormatMode::kPlain, templates_for(task));
    ex.reflection = std::string(trim(source.reflect(task, ex.first_answer)));
    if (ex.reflection.empty()) {
      drop("empty_reflection");
      continue;
    }
    if (options.quality_filter && !options.quality_filter(ex)) {
      drop("quality_filter");
      continue;
    }
    correct += ex.initially_correct ? 1 : 0;
    out.examples.push_back(std::move(ex));
  }

  out.report.total = out.examples.size();
  if (out.examples.empty()) {
    throw InsufficientDiversity("forge: every task was dropped");
  }
  out.report.correct_fraction =
      static_cast<double>(correct) / static_cast<double>(out.examples.size());
  if (std::abs(out.report.correct_fraction - options.target_correct_fraction) >
      options.tolerance + 1e-12) {
    throw InsufficientDiversity(fmt::format(
        "forge: correct fraction {:.3f} outside {:.2f} +/- {:.2f} ({} dropped)",
        out.report.correct_fraction, options.target_correct_fraction, options.tolerance,
        out.report.dropped));
  }
  return out;
}

/// Decisions the policy must reproduce for `ex`: every segment tagged, the
/// first answer under the task's cue, the reflection class, and a revise
/// decision that lands on the ground truth. The reflection was written with
/// the ground truth in view, so the revise slot sees a truthful check.
inline std::vector<Decision> sft_targets(const SftExample& ex, const Task& task,
                                         const DecisionSchema& schema) {
  const auto first = task.candidate_index(ex.first_answer);
  const auto second = task.candidate_index(ex.ground_truth_answer);
  if (!first || !second) {
    throw UnknownChoice(fmt::format("example {}: answer outside the task's candidates", ex.task_id));
  }
  const std::size_t k = num_candidates_of(schema);
  std::vector<Decision> targets;
  for (std::size_t s = slot::kFormatThink1; s <= slot::kFormatAnswer2; ++s) {
    targets.push_back({schema.row(s, std::size_t{0}), kTagged, 0.0});
  }
  targets.push_back({schema.row(slot::kFirstAnswer, task.cue_index), *first, 0.0});
  const ReflectionStyle style = classify_reflection(ex.reflection);
  targets.push_back({schema.row(slot::kReflectionStyle, std::size_t{0}),
                     static_cast<std::size_t>(style), 0.0});
  std::optional<CheckSignal> signal;
  if (style != ReflectionStyle::kEmpty) signal = CheckSignal{*first == *second, *second};
  const std::size_t revise = *first == *second ? kKeep : 1 + *second;
  targets.push_back({schema.row(slot::kRevise, revise_context(signal, k)), revise, 0.0});
  return targets;
}

/// Negative log-likelihood of the whole target sequence (sum over slots).
inline double sequence_nll(const TabularPolicy& policy, std::span<const Decision> targets) {
  double nll = 0.0;
  for (const Decision& d : targets) nll -= policy.log_prob(d.row, d.choice);
  return nll;
}

struct SftOptions {
  std::size_t epochs = 1;
  double learning_rate = 0.08;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::size_t batch_size = 1;  // 0 means the whole dataset per step
  bool shuffle = true;
  std::uint64_t seed = 0;
};

struct SftResult {
  TabularPolicy policy;
  std::vector<double> loss_trace;  // mean NLL per slot, one entry per epoch
};

inline SftResult cold_start_train(TabularPolicy policy, std::span<const SftExample> examples,
                                  std::span<const Task> tasks, const SftOptions& options = {}) {
  if (examples.empty()) throw InvalidConfig("cold_start_train: no examples");
  std::unordered_map<std::uint64_t, const Task*> by_id;
  for (const Task& t : tasks) by_id[t.task_id] = &t;

  std::vector<std::vector<Decision>> targets;
  targets.reserve(examples.size());
  for (const SftExample& ex : examples) {
    const auto it = by_id.find(ex.task_id);
    if (it == by_id.end()) throw DataError(fmt::format("example refers to unknown task {}", ex.task_id));
    targets.push_back(sft_targets(ex, *it->second, policy.schema()));
  }

  Optimizer opt(options.optimizer, options.learning_rate);
  const std::size_t batch = options.batch_size == 0 ? targets.size() : options.batch_size;
  std::vector<std::size_t> order(targets.size());
  std::vector<double> grad(policy.num_params());
  SftResult result{policy, {}};

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (options.shuffle) {
      Rng rng(derive_seed({options.seed, 0x736674ULL, epoch}));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    double nll_sum = 0.0;
    std::size_t slot_count = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& seq = targets[order[i]];
        nll_sum += sequence_nll(result.policy, seq);
        slot_count += seq.size();
        // d(-log p)/d logits = -(d log p / d logits)
        for (const Decision& d : seq) result.policy.accumulate_grad_log_prob(d.row, d.choice, -w, grad);
      }
      opt.step(result.policy, grad);
    }
    result.loss_trace.push_back(nll_sum / static_cast<double>(slot_count));
  }
  return result;
}

// Dataset records: {"id", "messages": [system, user, assistant], "images"}.

inline constexpr std::string_view kSftSystemPrompt =
    "You are a reasoning expert. Solve the question in two rounds: write a first chain of thought "
    "and answer, critique that attempt, then give a corrected final answer.";

inline nlohmann::json sft_example_to_json(const SftExample& ex) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", kSftSystemPrompt}});
  messages.push_back(
      {{"role", "user"}, {"content", "Question: <question>" + ex.question + "</question>\nImage: <image>"}});
  messages.push_back({{"role", "assistant"}, {"content", ex.assistant_content()}});
  nlohmann::json images = nlohmann::json::array();
  if (ex.image_ref) images.push_back(*ex.image_ref);
  return nlohmann::json{{"id", ex.task_id}, {"messages", messages}, {"images", images}};
}

/// Rebuilds an example from a dataset record. The first attempt is
/// re-rendered with the task's templates so it matches what the forge wrote.
inline SftExample sft_example_from_json(const nlohmann::json& j, const Task& task) {
  try {
    SftExample ex;
    ex.task_id = j.at("id").get<std::uint64_t>();
    const auto& messages = j.at("messages");
    std::string user, assistant;
    for (const auto& m : messages) {
      const std::string role = m.at("role").get<std::string>();
      if (role == "user") user = m.at("content").get<std::string>();
      if (role == "assistant") assistant = m.at("content").get<std::string>();
    }
    const auto qb = user.find("<question>");
    const auto qe = user.find("</question>");
    ex.question = (qb != std::string::npos && qe != std::string::npos && qe > qb)
                      ? user.substr(qb + 10, qe - qb - 10)
                      : task.question_text;
    const StructuredResponse r = parse_sequence(assistant, sft_target_segments());
    if (!r.well_formed || !r.first_answer || !r.second_answer) {
      throw DataError(fmt::format("record {}: assistant turn does not follow the SFT layout", ex.task_id));
    }
    ex.first_answer = *r.first_answer;
    ex.ground_truth_answer = *r.second_answer;
    ex.reflection = r.find(SegmentKind::kReflection)->content;
    ex.initially_correct = answers_match(ex.first_answer, task.gold_answer);
    if (j.contains("images") && !j.at("images").empty()) {
      ex.image_ref = j.at("images").at(0).get<std::string>();
    }
    const Segment* think = r.find(SegmentKind::kThink1);
    ex.initial_response = fmt::format("<think> {} </think>\n<answer> The answer is $\\boxed{{{}}}$. </answer>",
                                      think->content, ex.first_answer);
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("SFT record: ") + e.what());
  }
}

inline void write_sft_examples(std::span<const SftExample> examples, std::ostream& out) {
  for (const SftExample& ex : examples) out << sft_example_to_json(ex).dump() << '\n';
}

inline std::vector<SftExample> read_sft_examples(std::istream& in, std::span<const Task> tasks) {
  std::unordered_map<std::uint64_t, const Task*> by_id;
  for (const Task& t : tasks) by_id[t.task_id] = &t;
  std::vector<SftExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("SFT line {}: {}", lineno, e.what()));
    }
    const std::uint64_t id = j.value("id", std::uint64_t{0});
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError(fmt::format("SFT line {}: unknown task {}", lineno, id));
    out.push_back(sft_example_from_json(j, *it->second));
  }
  return out;
}

}  // namespace srpo

#endif  // SRPO_SFT_HPP_
