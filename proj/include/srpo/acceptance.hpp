// Acceptance checks for the reward, the optimization math, the parser and
// the training pipeline. Each check reports pass/fail with a short detail
// line; run_acceptance runs them in order.
#ifndef SRPO_ACCEPTANCE_HPP_
#define SRPO_ACCEPTANCE_HPP_

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "srpo/config.hpp"
#include "srpo/grpo_math.hpp"
#include "srpo/policy.hpp"
#include "srpo/response_format.hpp"
#include "srpo/reward.hpp"
#include "srpo/trainer.hpp"

namespace srpo::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the command line with the given arguments and returns its exit code.
using CliEntry = std::function<int(const std::vector<std::string>&)>;

struct ParserCase {
  std::string_view text;
  FormatMode mode;
  bool well_formed;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string reflective(std::string_view t1, std::string_view a1, std::string_view r,
                              std::string_view t2, std::string_view a2) {
  return fmt::format(
      "<think>{}</think>\n<answer>{}</answer>\n<reflection>{}</reflection>\n"
      "<think>{}</think>\n<answer>{}</answer>",
      t1, a1, r, t2, a2);
}

}  // namespace detail

// Hand-labeled corpus.
inline const std::vector<ParserCase>& parser_corpus() {
  using M = FormatMode;
  static const std::vector<ParserCase> cases = {
      // reflective
      {"<think>a</think><answer>$\\boxed{B}$</answer><reflection>check</reflection><think>b</think><answer>$\\boxed{B}$</answer>", M::kReflective, true},
      {"<think>a</think><answer>B</answer><reflect>check</reflect><think>b</think><answer>C</answer>", M::kReflective, true},
      {"<think> a </think>\n\n<answer> B </answer>\n  <reflection> r </reflection>\n<think> b </think>\n<answer> B </answer>\n", M::kReflective, true},
      {"Sure. <think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer> done.", M::kReflective, true},
      {"<think>a</think><answer>B</answer><reflection></reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer><answer>C</answer>", M::kReflective, false},
      {"<answer>B</answer><think>a</think><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<reflection>r</reflection><think>a</think><answer>B</answer><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a <think>b</think></think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a <answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</answer><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"", M::kReflective, false},
      {"The answer is B.", M::kReflective, false},
      {"</think></answer></reflection></think></answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflect>r</reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<THINK>a</THINK><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"< think >a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><reflection>s</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer><think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>x</think><think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>2+2</think><answer>$\\boxed{4}$</answer><reflection>recount</reflection><think>4</think><answer>$\\boxed{4.0}$</answer>", M::kReflective, true},
      {"<think>x < y and y > z</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<think>about <thinking> habits</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<think>partial </think text</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</ans", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflection>r</reflection>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a <answer>inner</answer></think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer>r</reflect><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>line one\nline two \xc3\xa9t\xc3\xa9</think>\n<answer>$\\boxed{C}$</answer>\n<reflection>first\npass\nrechecked</reflection>\n<think>ok</think>\n<answer>$\\boxed{C}$</answer>", M::kReflective, true},
      {"<think>a</think><answer>no box here</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, true},
      {"<think >a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><Reflection>r</Reflection><think>b</think><answer>B</answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer></answer>", M::kReflective, false},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B", M::kReflective, false},
      // two-step
      {"<think>a</think><answer>B</answer><think>b</think><answer>B</answer>", M::kTwoStepThinking, true},
      {"<think>a</think><answer>B</answer><reflection>r</reflection><think>b</think><answer>B</answer>", M::kTwoStepThinking, false},
      {"<think>a</think><answer>B</answer><think>b</think>", M::kTwoStepThinking, false},
      {"<think>a</think><answer>B</answer><think>b</think><answer>B</answer><answer>C</answer>", M::kTwoStepThinking, false},
      {"<think>a</think><think>b</think><answer>B</answer><answer>B</answer>", M::kTwoStepThinking, false},
      // plain
      {"<think>a</think><answer>$\\boxed{A}$</answer>", M::kPlain, true},
      {"<think>a</think><answer>B</answer><think>b</think><answer>B</answer>", M::kPlain, false},
      {"<answer>B</answer>", M::kPlain, false},
      {"<think>a</think>", M::kPlain, false},
      {"<answer>B</answer><think>a</think>", M::kPlain, false},
      {"<think>a</think> so the result follows: <answer>B</answer>", M::kPlain, true},
      {"<think></think><answer>B</answer>", M::kPlain, true},
      {"<think>a</think><answer>B</answer><reflection>r</reflection>", M::kPlain, false},
  };
  return cases;
}

inline CheckResult reward_truth_table() {
  const auto t0 = detail::Clock::now();
  CheckResult r{1, "reward truth table"};
  const RewardConfig cfg;
  bool ok = i_eff(true, true, cfg) == 0.25 && i_eff(false, true, cfg) == 0.5 &&
            i_eff(false, false, cfg) == 0.0 && i_eff(true, false, cfg) == -0.25;

  const std::string good = detail::reflective("x y", "$\\boxed{B}$", "check it", "z", "$\\boxed{B}$");
  const std::string wrong = detail::reflective("x y", "$\\boxed{C}$", "check it", "z", "$\\boxed{B}$");
  const std::string broken = "<think>x y</think><answer>$\\boxed{B}$</answer>";
  const auto s_good = score(parse(good, FormatMode::kReflective), "B", cfg, FormatMode::kReflective);
  const auto s_wrong = score(parse(wrong, FormatMode::kReflective), "B", cfg, FormatMode::kReflective);
  const auto s_broken = score(parse(broken, FormatMode::kReflective), "B", cfg, FormatMode::kReflective);
  ok = ok && s_good.r_format == 0.5 && s_good.r_accuracy == 0.5 && s_good.r_task == 1.0;
  ok = ok && s_wrong.r_format == 0.5 && s_wrong.r_accuracy == 0.0;
  ok = ok && s_broken.r_format == 0.0 && s_broken.r_accuracy == 0.5;
  ok = ok && s_good.i_eff == 0.25 && s_wrong.i_eff == 0.5;
  r.seconds = detail::since(t0);
  r.passed = ok && r.seconds < 1.0;
  r.detail = fmt::format("i_eff=({},{},{},{}) r_format={} r_accuracy={}/{}", i_eff(true, true, cfg),
                         i_eff(false, true, cfg), i_eff(false, false, cfg), i_eff(true, false, cfg),
                         s_good.r_format, s_good.r_accuracy, s_wrong.r_accuracy);
  return r;
}

inline CheckResult length_shaping() {
  const auto t0 = detail::Clock::now();
  CheckResult r{2, "length shaping"};
  const double target = 200.0, tmax = 250.0;
  const double at_target = f_len(target, target, tmax);
  const double at_max = f_len(tmax, target, tmax);
  const double err_max = std::abs(at_max - std::exp(-2.0));
  std::size_t violations = 0;
  double prev_left = at_target, prev_right = at_target;
  for (int i = 1; i <= 1000; ++i) {
    const double left = f_len(target - 0.199 * i, target, tmax);
    const double right = f_len(target + 0.5 * i, target, tmax);
    if (!(left < prev_left)) ++violations;
    if (!(right < prev_right)) ++violations;
    prev_left = left;
    prev_right = right;
  }
  r.seconds = detail::since(t0);
  r.passed = at_target == 1.0 && err_max < 1e-12 && violations == 0 && r.seconds < 1.0;
  r.detail = fmt::format("f(T)={} |f(Tmax)-e^-2|={:.3g} monotone_violations={}", at_target, err_max,
                         violations);
  return r;
}

inline CheckResult advantage_normalization() {
  const auto t0 = detail::Clock::now();
  CheckResult r{3, "advantage normalization"};
  Rng rng(0xad7a);
  double worst_sum = 0.0, worst_var = 0.0, mean_sum = 0.0;
  std::size_t degenerate_bad = 0;
  const int groups = 10000;
  for (int g = 0; g < groups; ++g) {
    const std::size_t size = 2 + rng.below(15);
    std::vector<double> rewards(size);
    for (double& v : rewards) v = rng.uniform(-0.25, 1.6);
    rewards[0] = rewards[1] + 0.5;  // never constant
    const AdvantageSet a = advantages(rewards);
    double sum = 0.0, sq = 0.0;
    for (double v : a.advantages) sum += v;
    for (double v : a.advantages) sq += (v - sum / size) * (v - sum / size);
    worst_sum = std::max(worst_sum, std::abs(sum));
    mean_sum += std::abs(sum) / groups;
    worst_var = std::max(worst_var, std::abs(sq / size - 1.0));

    const std::vector<double> flat(size, rewards[0]);
    for (double v : advantages(flat).advantages) degenerate_bad += v != 0.0 ? 1 : 0;
  }
  r.seconds = detail::since(t0);
  r.passed = worst_sum < 1e-9 && worst_var < 1e-9 && degenerate_bad == 0 && r.seconds < 5.0;
  r.detail = fmt::format("max|sum A|={:.3g} mean|sum A|={:.3g} max|var-1|={:.3g} degenerate_nonzero={}",
                         worst_sum, mean_sum, worst_var, degenerate_bad);
  return r;
}

inline CheckResult gradient_correctness() {
  const auto t0 = detail::Clock::now();
  CheckResult r{4, "objective gradient vs finite differences"};
  Rng rng(0x9ad);
  double worst = 0.0;
  std::size_t compared = 0, failures = 0;
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<SlotSpec> slots;
    const std::size_t num_slots = 1 + rng.below(3);
    for (std::size_t s = 0; s < num_slots; ++s) {
      SlotSpec spec{fmt::format("s{}", s), {}, {}};
      for (std::size_t c = 0, n = 2 + rng.below(3); c < n; ++c) spec.choices.push_back(fmt::format("c{}", c));
      for (std::size_t c = 0, n = 1 + rng.below(3); c < n; ++c) spec.contexts.push_back(fmt::format("x{}", c));
      slots.push_back(spec);
    }
    auto schema = std::make_shared<const DecisionSchema>(slots);
    const double temps[] = {0.7, 1.0, 1.5};
    const double temperature = temps[rng.below(3)];
    TabularPolicy current(schema, temperature), old(schema, temperature), ref(schema, temperature);
    for (std::size_t i = 0; i < current.num_params(); ++i) {
      current.mutable_params()[i] = rng.uniform(-1.5, 1.5);
      old.mutable_params()[i] = current.params()[i] + rng.uniform(-0.4, 0.4);
      ref.mutable_params()[i] = rng.uniform(-1.5, 1.5);
    }
    std::vector<RolloutGroup> groups(1 + rng.below(3));
    for (RolloutGroup& g : groups) {
      g.members.resize(2 + rng.below(3));
      for (Rollout& m : g.members) {
        for (std::size_t s = 0; s < num_slots; ++s) {
          const std::size_t row = schema->row(s, rng.below(schema->slot(s).contexts.size()));
          const std::size_t choice = rng.below(schema->row_width(row));
          m.decisions.push_back({row, choice, old.log_prob(row, choice)});
        }
        m.advantage = rng.uniform(-2.0, 2.0);
      }
    }
    const double betas[] = {0.0, 0.04, 0.3};
    const double beta = betas[rng.below(3)];
    const double eps = 0.2;
    const ObjectiveResult analytic = objective(groups, current, ref, eps, beta);
    const double h = 1e-6;
    for (std::size_t i = 0; i < current.num_params(); ++i) {
      TabularPolicy plus = current, minus = current;
      plus.mutable_params()[i] += h;
      minus.mutable_params()[i] -= h;
      const double numeric = (objective(groups, plus, ref, eps, beta).value -
                              objective(groups, minus, ref, eps, beta).value) / (2 * h);
      const double a = analytic.gradient[i];
      const double err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double rel = scale > 0 ? err / scale : 0.0;
      ++compared;
      if (err > 1e-4 * scale + 1e-9) ++failures;
      if (scale > 1e-6) worst = std::max(worst, rel);
    }
  }
  r.seconds = detail::since(t0);
  r.passed = failures == 0 && r.seconds < 10.0;
  r.detail = fmt::format("instances=100 components={} failures={} worst_rel={:.3g}", compared, failures, worst);
  return r;
}

inline CheckResult kl_estimator() {
  const auto t0 = detail::Clock::now();
  CheckResult r{5, "k3 KL estimator"};
  Rng rng(0x6b33);
  std::size_t negative = 0;
  double equal_worst = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const double a = -rng.uniform(0.0, 30.0);
    const double b = -rng.uniform(0.0, 30.0);
    if (kl_k3(a, b) < 0.0) ++negative;
    equal_worst = std::max(equal_worst, std::abs(kl_k3(a, a)));
  }
  // u = ref / current = e and 0.5
  const double e_case = kl_k3(-2.0, -1.0);
  const double half_case = kl_k3(std::log(0.5), 2.0 * std::log(0.5));
  const double err_e = std::abs(e_case - (std::exp(1.0) - 2.0));
  const double err_half = std::abs(half_case - (0.5 - std::log(0.5) - 1.0));
  r.seconds = detail::since(t0);
  r.passed = negative == 0 && equal_worst <= 1e-12 && err_e <= 1e-12 && err_half <= 1e-12;
  r.detail = fmt::format("negatives={} max|k3(x,x)|={:.3g} err(e-2)={:.3g} err(0.5-ln0.5-1)={:.3g}",
                         negative, equal_worst, err_e, err_half);
  return r;
}

inline CheckResult filter_conformance() {
  const auto t0 = detail::Clock::now();
  CheckResult r{6, "accuracy filter"};
  std::vector<RolloutGroup> groups;
  for (std::size_t k = 0; k <= 8; ++k) {
    RolloutGroup g;
    g.prompt_id = k;
    for (std::size_t m = 0; m < 8; ++m) {
      Rollout roll;
      roll.correct = m < k;
      g.members.push_back(roll);
    }
    groups.push_back(g);
  }
  const auto kept = accuracy_filter(groups, 0.1, 0.9);
  std::vector<bool> is_kept(9, false);
  for (const RolloutGroup& g : kept) is_kept[g.prompt_id] = true;
  std::size_t mismatches = 0;
  std::string pattern;
  for (std::size_t k = 0; k <= 8; ++k) {
    const bool expected = 10 * k >= 8 && 10 * k <= 72;  // 0.1 <= k/8 <= 0.9
    mismatches += is_kept[k] != expected ? 1 : 0;
    pattern += is_kept[k] ? 'K' : 'D';
  }
  r.seconds = detail::since(t0);
  r.passed = mismatches == 0;
  r.detail = fmt::format("k/8 for k=0..8 -> {} mismatches={}", pattern, mismatches);
  return r;
}

inline CheckResult parser_robustness() {
  const auto t0 = detail::Clock::now();
  CheckResult r{7, "parser robustness"};
  std::size_t corpus_bad = 0;
  for (const ParserCase& c : parser_corpus()) {
    if (parse(c.text, c.mode).well_formed != c.well_formed) ++corpus_bad;
  }

  Rng rng(0xf022);
  const std::array<std::string, 5> parts = {"<think>a b c</think>", "<answer>$\\boxed{B}$</answer>",
                                            "<reflection>look again</reflection>", "<think>d e</think>",
                                            "<answer>$\\boxed{C}$</answer>"};
  const std::string full = parts[0] + parts[1] + parts[2] + parts[3] + parts[4];
  static constexpr std::string_view kAlphabet = "<>/{}\\$ abtxhinkswerflco";
  const std::array<std::string_view, 9> fragments = {"<think>", "</think>", "<answer>", "</answer>",
                                                     "<reflection>", "</reflection>", "<reflect>",
                                                     "\\boxed{", "}"};
  std::size_t wrong_flag = 0, invariant_bad = 0, threw = 0;
  const int fuzz = 100000;
  for (int i = 0; i < fuzz; ++i) {
    std::string text;
    std::optional<bool> expected;
    switch (i % 4) {
      case 0: {
        const std::size_t n = rng.below(200);
        for (std::size_t j = 0; j < n; ++j) text.push_back(static_cast<char>(rng.below(256)));
        break;
      }
      case 1: {
        const std::size_t n = rng.below(60);
        for (std::size_t j = 0; j < n; ++j) {
          if (rng.bernoulli(0.3)) text += fragments[rng.below(fragments.size())];
          else text.push_back(kAlphabet[rng.below(kAlphabet.size())]);
        }
        break;
      }
      case 2: {
        const std::size_t cut = rng.below(full.size());
        text = full.substr(0, cut);
        expected = false;
        break;
      }
      case 3: {
        std::array<std::size_t, 5> perm = {0, 1, 2, 3, 4};
        for (std::size_t j = perm.size(); j > 1; --j) std::swap(perm[j - 1], perm[rng.below(j)]);
        // Same tag sequence as the reference order means well formed.
        const auto tag = [](std::size_t p) { return p == 3 ? 0 : (p == 4 ? 1 : p); };
        bool same = true;
        for (std::size_t j = 0; j < 5; ++j) {
          text += parts[perm[j]];
          same = same && tag(perm[j]) == tag(j);
        }
        expected = same;
        break;
      }
    }
    try {
      const StructuredResponse s = parse(text, FormatMode::kReflective);
      if (expected && s.well_formed != *expected) ++wrong_flag;
      if (s.well_formed && s.segments.size() != 5) ++invariant_bad;
      if (s.segments.size() > 5) ++invariant_bad;
    } catch (...) {
      ++threw;
    }
  }
  r.seconds = detail::since(t0);
  r.passed = corpus_bad == 0 && wrong_flag == 0 && invariant_bad == 0 && threw == 0 && r.seconds < 30.0;
  r.detail = fmt::format("corpus={}/{} fuzz={} wrong_flags={} invariant_violations={} exceptions={}",
                         parser_corpus().size() - corpus_bad, parser_corpus().size(), fuzz, wrong_flag,
                         invariant_bad, threw);
  return r;
}

inline double sampled_validity(const TabularPolicy& policy, std::span<const Task> tasks, int passes) {
  double total = 0.0;
  for (int p = 0; p < passes; ++p) {
    EvalOptions o;
    o.greedy = false;
    o.seed = 1000 + static_cast<std::uint64_t>(p);
    total += evaluate(policy, tasks, FormatMode::kReflective, o).format_validity;
  }
  return total / passes;
}

inline CheckResult cold_start_efficacy() {
  const auto t0 = detail::Clock::now();
  CheckResult r{8, "cold-start format validity"};
  const RunConfig cfg;
  const TabularPolicy untrained(make_schema(cfg.num_candidates), cfg.temperature);
  std::optional<ForgeReport> report;
  const SftResult sft = run_cold_start(cfg, untrained, &report);
  const std::vector<Task> tasks = rl_task_set(cfg);
  const double before = sampled_validity(untrained, tasks, 4);
  const double after = sampled_validity(sft.policy, tasks, 4);
  r.seconds = detail::since(t0);
  const bool mix_ok = std::abs(report->correct_fraction - cfg.target_correct_fraction) <= 0.05;
  r.passed = report->total >= 1000 && mix_ok && cfg.sft_epochs == 1 && after >= 0.95 && before < 0.10 &&
             r.seconds < 120.0;
  r.detail = fmt::format("examples={} correct_fraction={:.3f} validity untrained={:.4f} after_sft={:.4f}",
                         report->total, report->correct_fraction, before, after);
  return r;
}

inline CheckResult convergence() {
  const auto t0 = detail::Clock::now();
  CheckResult r{9, "convergence"};
  RunConfig cfg;
  cfg.workers = 1;
  const PipelineResult run = run_pipeline(cfg);
  const double seconds = detail::since(t0);
  const auto& steps = run.metrics.steps;
  const std::size_t tail = std::min<std::size_t>(16, steps.size());
  double tail_acc = 0.0;
  for (std::size_t i = steps.size() - tail; i < steps.size(); ++i) tail_acc += steps[i].post_reflection_accuracy;
  tail_acc /= static_cast<double>(std::max<std::size_t>(tail, 1));
  const EvalSummary eval = evaluate(run.policy, run.rl_tasks, FormatMode::kReflective);

  std::ostringstream a, b;
  run.metrics.write_csv(a);
  run_pipeline(cfg).metrics.write_csv(b);
  const bool deterministic = a.str() == b.str();
  r.seconds = detail::since(t0);
  r.passed = steps.size() <= 5000 && tail_acc >= 0.90 && deterministic && seconds < 300.0;
  r.detail = fmt::format("tasks={} steps={} rollout_second_accuracy={:.4f} greedy_second_accuracy={:.4f} "
                         "deterministic={} run_seconds={:.2f}",
                         run.rl_tasks.size(), steps.size(), tail_acc, eval.second_accuracy.value_or(0.0),
                         deterministic, seconds);
  return r;
}

inline double sampled_correction(const TabularPolicy& policy, std::span<const Task> tasks, int passes) {
  double total = 0.0;
  for (int p = 0; p < passes; ++p) {
    EvalOptions o;
    o.greedy = false;
    o.seed = 2000 + static_cast<std::uint64_t>(p);
    total += evaluate(policy, tasks, FormatMode::kReflective, o).correction_rate;
  }
  return total / passes;
}

inline CheckResult directional_ablations() {
  const auto t0 = detail::Clock::now();
  CheckResult r{10, "directional ablations"};
  const RunConfig base;
  const std::vector<Task> tasks = rl_task_set(base);
  const TabularPolicy untrained(make_schema(base.num_candidates), base.temperature);
  int wins_a = 0, wins_b = 0, wins_c = 0, wins_d = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig full = base;
    full.seed = seed;
    const TabularPolicy sft = run_cold_start(full, untrained).policy;

    RunConfig plain = full;
    plain.mode = FormatMode::kPlain;
    RunConfig two_step = full;
    two_step.mode = FormatMode::kTwoStepThinking;
    RunConfig no_eff = full;
    no_eff.reward.i_eff_keep = no_eff.reward.i_eff_fix = 0.0;
    no_eff.reward.i_eff_fail = no_eff.reward.i_eff_break = 0.0;

    const RlResult r_full = run_rl(full, tasks, sft);
    const RlResult r_plain = run_rl(plain, tasks, sft);
    const RlResult r_two = run_rl(two_step, tasks, sft);
    const RlResult r_no_eff = run_rl(no_eff, tasks, sft);
    const RlResult r_no_sft = run_rl(full, tasks, untrained);

    const double acc_full = evaluate(r_full.policy, tasks, FormatMode::kReflective).final_accuracy;
    const double acc_plain = evaluate(r_plain.policy, tasks, FormatMode::kPlain).final_accuracy;
    const double acc_two = evaluate(r_two.policy, tasks, FormatMode::kTwoStepThinking).final_accuracy;
    const double corr_full = sampled_correction(r_full.policy, tasks, 8);
    const double corr_no_eff = sampled_correction(r_no_eff.policy, tasks, 8);
    const std::size_t never = std::numeric_limits<std::size_t>::max();
    const std::size_t steps_sft = r_full.metrics.first_step_reaching(0.8).value_or(never);
    const std::size_t steps_no_sft = r_no_sft.metrics.first_step_reaching(0.8).value_or(never);

    wins_a += acc_full - acc_plain >= 0.05 ? 1 : 0;
    wins_b += corr_full - corr_no_eff >= 0.05 ? 1 : 0;
    wins_c += acc_two < acc_full ? 1 : 0;
    wins_d += steps_no_sft > steps_sft ? 1 : 0;
    const auto fmt_steps = [never](std::size_t s) { return s == never ? std::string("never") : std::to_string(s); };
    per_seed += fmt::format(" [seed{} a:{:.3f}/{:.3f} b:{:.3f}/{:.3f} c:{:.3f}/{:.3f} d:{}/{}]", seed, acc_full,
                            acc_plain, corr_full, corr_no_eff, acc_two, acc_full, fmt_steps(steps_sft),
                            fmt_steps(steps_no_sft));
  }
  r.seconds = detail::since(t0);
  r.passed = wins_a >= 4 && wins_b >= 4 && wins_c >= 4 && wins_d >= 4;
  r.detail = fmt::format("seed wins a={}/5 b={}/5 c={}/5 d={}/5;{}", wins_a, wins_b, wins_c, wins_d, per_seed);
  return r;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

inline CheckResult training_dynamics_logging() {
  const auto t0 = detail::Clock::now();
  CheckResult r{11, "training dynamics logging"};
  RunConfig cfg;
  cfg.max_steps = 64;
  cfg.updates_per_batch = 4;
  cfg.learning_rate = 10.0;
  cfg.beta = 0.04;
  const PipelineResult run = run_pipeline(cfg);
  std::ostringstream csv;
  run.metrics.write_csv(csv);

  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  const std::vector<std::string> header = split_csv_line(line);
  const auto column = [&header](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const std::array<std::string_view, 9> series = {"mean_reward", "mean_response_length", "ratio_clip_upper",
                                                  "ratio_clip_lower", "policy_loss", "kl", "update",
                                                  "mean_correct_length", "mean_incorrect_length"};
  std::size_t missing = 0;
  for (auto name : series) missing += column(name) ? 0 : 1;

  std::size_t fresh = 0, fresh_nonzero = 0, later_clipped = 0;
  if (missing == 0) {
    const std::size_t c_update = *column("update"), c_up = *column("ratio_clip_upper"),
                      c_lo = *column("ratio_clip_lower");
    while (std::getline(in, line)) {
      const auto f = split_csv_line(line);
      if (f.size() != header.size()) {
        ++missing;
        break;
      }
      if (f[c_update] == "0") {
        ++fresh;
        if (f[c_up] != "0" || f[c_lo] != "0") ++fresh_nonzero;
      } else if (f[c_up] != "0" || f[c_lo] != "0") {
        ++later_clipped;
      }
    }
  }
  r.seconds = detail::since(t0);
  r.passed = missing == 0 && fresh > 0 && fresh_nonzero == 0 && later_clipped > 0;
  r.detail = fmt::format("columns={} missing_series={} fresh_snapshots={} nonzero_clip_on_first_update={} "
                         "later_updates_with_clipping={}",
                         header.size(), missing, fresh, fresh_nonzero, later_clipped);
  return r;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline CheckResult reproducibility(const CliEntry& cli) {
  const auto t0 = detail::Clock::now();
  CheckResult r{12, "reproducible train"};
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() /
                       fmt::format("srpo-repro-{}", std::chrono::steady_clock::now().time_since_epoch().count());
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "max_steps = 96\nupdates_per_batch = 2\nworkers = 4\nbeta = 0.04\n";
  }
  int codes[2];
  std::string files[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = dir / fmt::format("metrics{}.csv", i);
    codes[i] = cli({"train", "--config", (dir / "run.cfg").string(), "--seed", "7", "--metrics-out",
                    out.string()});
    files[i] = slurp(out);
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  r.seconds = detail::since(t0);
  r.passed = codes[0] == 0 && codes[1] == 0 && !files[0].empty() && files[0] == files[1];
  r.detail = fmt::format("exit={},{} bytes={},{} identical={}", codes[0], codes[1], files[0].size(),
                         files[1].size(), files[0] == files[1]);
  return r;
}

/// Suites: "formulas" (1-7), "training" (8-12), "all".
inline std::optional<std::vector<int>> suite_ids(std::string_view suite) {
  if (suite == "formulas") return std::vector<int>{1, 2, 3, 4, 5, 6, 7};
  if (suite == "training") return std::vector<int>{8, 9, 10, 11, 12};
  if (suite == "all" || suite == "acceptance") return std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  return std::nullopt;
}

inline CheckResult run_check(int id, const CliEntry& cli) {
  try {
    switch (id) {
      case 1: return reward_truth_table();
      case 2: return length_shaping();
      case 3: return advantage_normalization();
      case 4: return gradient_correctness();
      case 5: return kl_estimator();
      case 6: return filter_conformance();
      case 7: return parser_robustness();
      case 8: return cold_start_efficacy();
      case 9: return convergence();
      case 10: return directional_ablations();
      case 11: return training_dynamics_logging();
      case 12: return reproducibility(cli);
    }
  } catch (const std::exception& e) {
    return CheckResult{id, "exception", false, e.what(), 0.0};
  }
  return CheckResult{id, "unknown", false, "no such check", 0.0};
}

inline std::string format_line(const CheckResult& r) {
  return fmt::format("[{}] {:>2} {} ({:.2f}s): {}", r.passed ? "PASS" : "FAIL", r.id, r.name, r.seconds, r.detail);
}

/// Runs the checks, printing one line each as it finishes. Returns true if
/// all passed.
inline bool run_acceptance(const std::vector<int>& ids, const CliEntry& cli, std::ostream& out) {
  bool all = true;
  for (int id : ids) {
    const CheckResult r = run_check(id, cli);
    out << format_line(r) << std::endl;
    all = all && r.passed;
  }
  return all;
}

}  // namespace srpo::acceptance

#endif  // SRPO_ACCEPTANCE_HPP_
