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

// Synthetic multiple-choice reasoning tasks. Each task carries a cue that
// points at the gold answer unless the task is a distractor, and a noisy
// self-check channel that a reflection step can consult to revise a wrong
// first answer.

#ifndef SRPO_ENV_HPP_
#define SRPO_ENV_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "srpo/error.hpp"
#include "srpo/random.hpp"
#include "srpo/response_format.hpp"

namespace srpo {

enum class DomainTag { kArith, kGeometryLike, kChartLike };

inline std::string_view to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::kArith: return "arith";
    case DomainTag::kGeometryLike: return "geometry_like";
    case DomainTag::kChartLike: return "chart_like";
  }
  return "?";
}

inline std::optional<DomainTag> parse_domain_tag(std::string_view s) {
  if (s == "arith") return DomainTag::kArith;
  if (s == "geometry_like") return DomainTag::kGeometryLike;
  if (s == "chart_like") return DomainTag::kChartLike;
  return std::nullopt;
}

struct Task {
  std::uint64_t task_id = 0;
  std::string question_text;
  std::string gold_answer;
  std::vector<std::string> candidate_answers;
  double distractor_strength = 0.0;
  double self_check_reliability = 1.0;
  DomainTag domain_tag = DomainTag::kArith;
  std::size_t cue_index = 0;  // option the surface cue points at

  std::size_t gold_index() const {
    for (std::size_t i = 0; i < candidate_answers.size(); ++i)
      if (candidate_answers[i] == gold_answer) return i;
    throw DataError(fmt::format("task {}: gold answer not among candidates", task_id));
  }

  std::optional<std::size_t> candidate_index(std::string_view answer) const {
    for (std::size_t i = 0; i < candidate_answers.size(); ++i)
      if (answers_match(answer, candidate_answers[i])) return i;
    return std::nullopt;
  }
};

struct TaskSetSpec {
  std::size_t count = 512;
  std::uint64_t seed = 0;
  std::array<double, 3> mix = {1.0, 1.0, 1.0};  // arith, geometry_like, chart_like
  double distractor_lo = 0.2;
  double distractor_hi = 0.6;
  double reliability_lo = 1.0;
  double reliability_hi = 1.0;
  std::size_t num_candidates = 4;

  void validate() const {
    if (count < 1) throw InvalidConfig("task set: count must be >= 1");
    if (num_candidates < 2) throw InvalidConfig("task set: need at least 2 candidates");
    if (!(0.0 <= distractor_lo && distractor_lo <= distractor_hi && distractor_hi <= 1.0)) {
      throw InvalidConfig("task set: distractor range must lie in [0, 1]");
    }
    if (!(0.0 <= reliability_lo && reliability_lo <= reliability_hi && reliability_hi <= 1.0)) {
      throw InvalidConfig("task set: reliability range must lie in [0, 1]");
    }
    double total = 0.0;
    for (double w : mix) {
      if (w < 0.0) throw InvalidConfig("task set: negative mix weight");
      total += w;
    }
    if (!(total > 0.0)) throw InvalidConfig("task set: mix weights sum to zero");
  }
};

namespace detail {

inline std::string option_letter(std::size_t i) {
  return std::string(1, static_cast<char>('A' + i));
}

// Gold value, question stem and a pool of plausible wrong values.
struct Stem {
  int gold;
  std::string question;
  std::vector<int> wrong;
};

inline Stem make_stem(DomainTag tag, Rng& rng) {
  switch (tag) {
    case DomainTag::kArith: {
      const int a = 10 + static_cast<int>(rng.below(90));
      const int b = 10 + static_cast<int>(rng.below(90));
      const int s = a + b;
      return {s, fmt::format("What is {} + {}?", a, b),
              {s + 10, s - 10, s + 1, s - 1, s + 11, s - 9, a, b}};
    }
    case DomainTag::kGeometryLike: {
      const int x = 20 + static_cast<int>(rng.below(141));
      const int g = 180 - x;
      return {g,
              fmt::format("Angle 1 measures {} degrees. What is the measure of its supplementary angle?", x),
              {x, 90 - x > 0 ? 90 - x : x + 90, g + 10, g - 10, 360 - x, g + 5}};
    }
    case DomainTag::kChartLike: {
      std::set<int> values;
      while (values.size() < 6) values.insert(5 + static_cast<int>(rng.below(95)));
      std::vector<int> v(values.begin(), values.end());
      // Shuffle the listed order so the largest bar is not always last.
      for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
      const int g = *std::max_element(v.begin(), v.end());
      std::vector<int> wrong;
      for (int x : v)
        if (x != g) wrong.push_back(x);
      return {g,
              fmt::format("A bar chart shows the values {}, {}, {}, {}, {} and {}. What is the largest value?",
                          v[0], v[1], v[2], v[3], v[4], v[5]),
              wrong};
    }
  }
  throw InvalidConfig("unknown domain tag");
}

}  // namespace detail

/// Deterministic in `spec.seed`; task i only depends on (seed, i).
inline std::vector<Task> generate(const TaskSetSpec& spec) {
  spec.validate();
  const double mix_total = spec.mix[0] + spec.mix[1] + spec.mix[2];
  std::vector<Task> tasks;
  tasks.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Rng rng(derive_seed({spec.seed, 0x7461736bULL, i}));
    Task t;
    t.task_id = i;

    double u = rng.uniform() * mix_total;
    t.domain_tag = DomainTag::kChartLike;
    if (u < spec.mix[0]) {
      t.domain_tag = DomainTag::kArith;
    } else if (u < spec.mix[0] + spec.mix[1]) {
      t.domain_tag = DomainTag::kGeometryLike;
    }

    detail::Stem stem = detail::make_stem(t.domain_tag, rng);
    std::vector<int> values = {stem.gold};
    std::set<int> used = {stem.gold};
    for (int w : stem.wrong) {
      if (values.size() == spec.num_candidates) break;
      if (w > 0 && used.insert(w).second) values.push_back(w);
    }
    for (int extra = 1; values.size() < spec.num_candidates; ++extra) {
      if (used.insert(stem.gold + 20 * extra).second) values.push_back(stem.gold + 20 * extra);
    }

    // Place gold uniformly; the rest keep their pool order.
    const std::size_t gold_pos = rng.below(spec.num_candidates);
    std::vector<int> placed(values.begin() + 1, values.end());
    placed.insert(placed.begin() + static_cast<std::ptrdiff_t>(gold_pos), stem.gold);
    for (int v : placed) t.candidate_answers.push_back(std::to_string(v));
    t.gold_answer = std::to_string(stem.gold);

    t.distractor_strength = rng.uniform(spec.distractor_lo, spec.distractor_hi);
    t.self_check_reliability = rng.uniform(spec.reliability_lo, spec.reliability_hi);
    t.cue_index = gold_pos;
    if (rng.bernoulli(t.distractor_strength)) {
      const std::size_t k = rng.below(spec.num_candidates - 1);
      t.cue_index = k < gold_pos ? k : k + 1;
    }

    std::string choices;
    for (std::size_t c = 0; c < placed.size(); ++c) {
      choices += fmt::format(" ({}) {}", detail::option_letter(c), placed[c]);
    }
    t.question_text = stem.question + " Choices:" + choices;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

/// (first_correct, second_correct); absent answers grade false.
inline std::pair<bool, bool> grade(const Task& task, const StructuredResponse& response) {
  const bool first = response.first_answer && answers_match(*response.first_answer, task.gold_answer);
  const bool second = response.second_answer && answers_match(*response.second_answer, task.gold_answer);
  return {first, second};
}

/// Result of re-checking a first answer. Truthful with probability equal to
/// the task's self-check reliability.
struct CheckSignal {
  bool says_correct = false;
  std::size_t hint = 0;  // option the check believes is right
};

inline CheckSignal self_check(const Task& task, std::size_t first_index, Rng& rng) {
  const std::size_t gold = task.gold_index();
  const std::size_t k = task.candidate_answers.size();
  CheckSignal s;
  const bool truthful = rng.bernoulli(task.self_check_reliability);
  s.says_correct = truthful ? first_index == gold : first_index != gold;
  if (rng.bernoulli(task.self_check_reliability)) {
    s.hint = gold;
  } else {
    const std::size_t j = rng.below(k - 1);
    s.hint = j < gold ? j : j + 1;
  }
  return s;
}

/// Template reflection written with access to the ground truth. Wrong first
/// answers are revised toward gold; correct ones are streamlined.
inline std::string oracle_reflection(const Task& task, std::string_view first_answer,
                                     ReflectionStyle style) {
  if (style == ReflectionStyle::kEmpty) return "";
  const bool correct = answers_match(first_answer, task.gold_answer);
  std::string brief =
      correct ? fmt::format("The first answer {} is right; the reasoning can be shortened to the decisive step.",
                            task.gold_answer)
              : fmt::format("The first answer {} is wrong; the question actually gives {}, so revise it.",
                            first_answer, task.gold_answer);
  if (style == ReflectionStyle::kBrief) return brief;
  std::string elaboration =
      correct
          ? "Looking back over the whole chain of thought, every step that led to the result holds up, but "
            "several sentences restate the same relation without adding anything new, one intermediate "
            "comparison is repeated twice, and the closing check could be merged into the main argument. "
            "A cleaner second pass should keep the decisive relation, drop the repetition, state the single "
            "comparison that settles the choice, and then give the same final value without further detours."
          : "Looking back over the whole chain of thought, the error comes from trusting the surface cue in the "
            "question instead of deriving the quantity that was actually asked for, and the comparison with "
            "the listed options was never carried out carefully. A better second pass should restate what "
            "the question asks, derive the quantity step by step from the given numbers, check each listed "
            "option against that derivation, and only then commit to the option that agrees with it.";
  return brief + " " + elaboration;
}

// Line-delimited task records.

inline nlohmann::json task_to_json(const Task& t) {
  return nlohmann::json{{"task_id", t.task_id},
                        {"question_text", t.question_text},
                        {"gold_answer", t.gold_answer},
                        {"candidates", t.candidate_answers},
                        {"distractor_strength", t.distractor_strength},
                        {"reliability", t.self_check_reliability},
                        {"domain_tag", std::string(to_string(t.domain_tag))},
                        {"cue", t.cue_index}};
}

inline Task task_from_json(const nlohmann::json& j) {
  try {
    Task t;
    t.task_id = j.at("task_id").get<std::uint64_t>();
    t.question_text = j.at("question_text").get<std::string>();
    t.gold_answer = j.at("gold_answer").get<std::string>();
    t.candidate_answers = j.at("candidates").get<std::vector<std::string>>();
    t.distractor_strength = j.at("distractor_strength").get<double>();
    t.self_check_reliability = j.at("reliability").get<double>();
    const auto tag = parse_domain_tag(j.at("domain_tag").get<std::string>());
    if (!tag) throw DataError("unknown domain_tag");
    t.domain_tag = *tag;
    t.cue_index = j.value("cue", std::size_t{0});
    if (t.candidate_answers.size() < 2) throw DataError("fewer than 2 candidates");
    if (t.cue_index >= t.candidate_answers.size()) throw DataError("cue out of range");
    (void)t.gold_index();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("task record: ") + e.what());
  }
}

inline void write_tasks(std::span<const Task> tasks, std::ostream& out) {
  for (const Task& t : tasks) out << task_to_json(t).dump() << '\n';
}

inline std::vector<Task> read_tasks(std::istream& in) {
  std::vector<Task> tasks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      tasks.push_back(task_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("tasks line {}: {}", lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("tasks line {}: {}", lineno, e.what()));
    }
  }
  return tasks;
}

}  // namespace srpo

#endif  // SRPO_ENV_HPP_
