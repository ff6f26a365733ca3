// Command line front end. run_cli is reentrant so tests and the verify
// suite can drive it in-process.
#ifndef SRPO_CLI_HPP_
#define SRPO_CLI_HPP_

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "srpo/acceptance.hpp"
#include "srpo/config.hpp"
#include "srpo/env.hpp"
#include "srpo/error.hpp"
#include "srpo/policy.hpp"
#include "srpo/reward.hpp"
#include "srpo/sft.hpp"
#include "srpo/trainer.hpp"

namespace srpo {

inline constexpr std::string_view kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitVerify = 4,
};

namespace cli {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> settings;  // key=value overrides
};

inline void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("--config", o.config_path, "config file of key = value lines");
  cmd.add_option("--seed", o.seed, "training seed");
  cmd.add_option("--set", o.settings, "override a config key, as key=value");
}

inline RunConfig resolve(const CommonOptions& o) {
  RunConfig cfg;
  if (!o.config_path.empty()) cfg = load_config_file(o.config_path, cfg);
  for (const std::string& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidConfig("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

inline FormatMode mode_or_throw(const std::string& text) {
  const auto m = parse_format_mode(text);
  if (!m) throw InvalidConfig("unknown mode '" + text + "' (reflective, two-step, plain)");
  return *m;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

inline TabularPolicy load_checkpoint(const std::string& path, const RunConfig& cfg) {
  std::ifstream in = open_in(path);
  return load_policy(in, make_schema(cfg.num_candidates));
}

inline void save_checkpoint(const std::string& path, const TabularPolicy& policy) {
  std::ofstream out = open_out(path);
  save_policy(policy, out);
}

}  // namespace cli

/// Parses `args` (without the program name) and runs the subcommand.
/// Summaries go to `out`, diagnostics to `err`.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-reflection policy optimization on a synthetic multiple-choice environment", "srpo"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "print the version");

  // forge-data
  cli::CommonOptions forge_common;
  std::string forge_out, forge_tasks_out, forge_reflections;
  CLI::App* forge_cmd = app.add_subcommand("forge-data", "build the cold-start SFT dataset");
  cli::add_common(*forge_cmd, forge_common);
  forge_cmd->add_option("--out", forge_out, "SFT JSONL output")->required();
  forge_cmd->add_option("--tasks-out", forge_tasks_out, "also write the source tasks as JSONL");
  forge_cmd->add_option("--reflections", forge_reflections, "JSONL of {task_id, reflection}");

  // sft
  cli::CommonOptions sft_common;
  std::string sft_data, sft_out, sft_init;
  CLI::App* sft_cmd = app.add_subcommand("sft", "cold-start fine-tuning");
  cli::add_common(*sft_cmd, sft_common);
  sft_cmd->add_option("--data", sft_data, "SFT JSONL from forge-data (forged on the fly if absent)");
  sft_cmd->add_option("--init", sft_init, "starting checkpoint");
  sft_cmd->add_option("--out", sft_out, "checkpoint output")->required();

  // train
  cli::CommonOptions train_common;
  std::string train_algorithm, train_mode, train_metrics, train_init, train_out;
  CLI::App* train_cmd = app.add_subcommand("train", "cold start then RL, per the config stage");
  cli::add_common(*train_cmd, train_common);
  train_cmd->add_option("--algorithm", train_algorithm, "grpo or ppo");
  train_cmd->add_option("--mode", train_mode, "reflective, two-step or plain");
  train_cmd->add_option("--metrics-out", train_metrics, "per-step metrics CSV");
  train_cmd->add_option("--init", train_init, "starting checkpoint");
  train_cmd->add_option("--out", train_out, "checkpoint output");

  // eval
  cli::CommonOptions eval_common;
  std::string eval_checkpoint, eval_mode = "reflective", eval_tasks;
  bool eval_sampled = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "accuracy, validity and correction rate of a checkpoint");
  cli::add_common(*eval_cmd, eval_common);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint (uniform policy if absent)");
  eval_cmd->add_option("--mode", eval_mode, "reflective, two-step or plain");
  eval_cmd->add_option("--tasks", eval_tasks, "task JSONL (RL task set if absent)");
  eval_cmd->add_flag("--sampled", eval_sampled, "sample instead of argmax decoding");

  // score
  std::string score_text, score_file, score_gold, score_mode = "reflective";
  CLI::App* score_cmd = app.add_subcommand("score", "parse and score one response");
  auto* text_opt = score_cmd->add_option("--response", score_text, "response text");
  auto* file_opt = score_cmd->add_option("--response-file", score_file, "file holding the response");
  text_opt->excludes(file_opt);
  score_cmd->add_option("--gold", score_gold, "gold answer")->required();
  score_cmd->add_option("--mode", score_mode, "reflective, two-step or plain");

  // verify
  std::string verify_suite = "all";
  CLI::App* verify_cmd = app.add_subcommand("verify", "run acceptance checks");
  verify_cmd->add_option("--suite", verify_suite, "formulas, training or all");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "srpo: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (show_version) {
      out << "srpo " << kVersion << '\n';
      return kExitOk;
    }

    if (*forge_cmd) {
      const RunConfig cfg = cli::resolve(forge_common);
      cfg.validate();
      const std::vector<Task> tasks = sft_task_set(cfg);
      const TabularPolicy initial(make_schema(cfg.num_candidates), cfg.temperature);
      std::unique_ptr<ReflectionSource> source;
      if (forge_reflections.empty()) {
        source = std::make_unique<OracleReflectionSource>();
      } else {
        std::ifstream in = cli::open_in(forge_reflections);
        source = std::make_unique<FileReflectionSource>(in);
      }
      ForgeOptions fo;
      fo.target_correct_fraction = cfg.target_correct_fraction;
      fo.seed = cfg.seed;
      const ForgeResult forged = forge(tasks, initial, *source, fo);
      {
        std::ofstream o = cli::open_out(forge_out);
        write_sft_examples(forged.examples, o);
      }
      if (!forge_tasks_out.empty()) {
        std::ofstream o = cli::open_out(forge_tasks_out);
        write_tasks(tasks, o);
      }
      out << fmt::format("forge-data examples={} correct_fraction={:.4f} dropped={} out={}\n",
                         forged.report.total, forged.report.correct_fraction, forged.report.dropped, forge_out);
      return kExitOk;
    }

    if (*sft_cmd) {
      const RunConfig cfg = cli::resolve(sft_common);
      cfg.validate();
      const TabularPolicy initial = sft_init.empty()
                                        ? TabularPolicy(make_schema(cfg.num_candidates), cfg.temperature)
                                        : cli::load_checkpoint(sft_init, cfg);
      SftResult result{initial, {}};
      std::size_t count = 0;
      if (sft_data.empty()) {
        std::optional<ForgeReport> report;
        result = run_cold_start(cfg, initial, &report);
        count = report->total;
      } else {
        const std::vector<Task> tasks = sft_task_set(cfg);
        std::ifstream in = cli::open_in(sft_data);
        const std::vector<SftExample> examples = read_sft_examples(in, tasks);
        SftOptions so;
        so.epochs = cfg.sft_epochs;
        so.learning_rate = cfg.sft_learning_rate;
        so.optimizer = cfg.sft_optimizer;
        so.batch_size = cfg.sft_batch_size;
        so.seed = cfg.seed;
        result = cold_start_train(initial, examples, tasks, so);
        count = examples.size();
      }
      cli::save_checkpoint(sft_out, result.policy);
      EvalOptions eo;
      eo.greedy = false;
      eo.seed = cfg.seed;
      const EvalSummary s = evaluate(result.policy, rl_task_set(cfg), FormatMode::kReflective, eo);
      out << fmt::format("sft examples={} epochs={} final_loss={:.6f} format_validity={:.4f} out={}\n", count,
                         cfg.sft_epochs, result.loss_trace.empty() ? 0.0 : result.loss_trace.back(),
                         s.format_validity, sft_out);
      return kExitOk;
    }

    if (*train_cmd) {
      RunConfig cfg = cli::resolve(train_common);
      if (!train_algorithm.empty()) {
        if (train_algorithm == "grpo") cfg.algorithm = Algorithm::kGrpo;
        else if (train_algorithm == "ppo") cfg.algorithm = Algorithm::kPpo;
        else throw InvalidConfig("unknown algorithm '" + train_algorithm + "' (grpo, ppo)");
      }
      if (!train_mode.empty()) cfg.mode = cli::mode_or_throw(train_mode);
      if (!train_metrics.empty()) cfg.metrics_out = train_metrics;
      cfg.validate();
      std::optional<TabularPolicy> initial;
      if (!train_init.empty()) initial = cli::load_checkpoint(train_init, cfg);
      const PipelineResult run = run_pipeline(cfg, initial);
      if (!cfg.metrics_out.empty()) {
        std::ofstream o = cli::open_out(cfg.metrics_out);
        run.metrics.write_csv(o);
      }
      if (!train_out.empty()) cli::save_checkpoint(train_out, run.policy);
      const EvalSummary s = evaluate(run.policy, run.rl_tasks, cfg.mode);
      out << fmt::format(
          "train stage={} algorithm={} mode={} seed={} steps={} first_accuracy={:.4f} final_accuracy={:.4f} "
          "format_validity={:.4f}\n",
          to_string(cfg.stage), to_string(cfg.algorithm), to_string(cfg.mode), cfg.seed, run.metrics.steps.size(),
          s.first_accuracy, s.final_accuracy, s.format_validity);
      return kExitOk;
    }

    if (*eval_cmd) {
      const RunConfig cfg = cli::resolve(eval_common);
      cfg.validate();
      const FormatMode mode = cli::mode_or_throw(eval_mode);
      const TabularPolicy policy = eval_checkpoint.empty()
                                       ? TabularPolicy(make_schema(cfg.num_candidates), cfg.temperature)
                                       : cli::load_checkpoint(eval_checkpoint, cfg);
      std::vector<Task> tasks;
      if (eval_tasks.empty()) {
        tasks = rl_task_set(cfg);
      } else {
        std::ifstream in = cli::open_in(eval_tasks);
        tasks = read_tasks(in);
      }
      EvalOptions eo;
      eo.greedy = !eval_sampled;
      eo.seed = cfg.seed;
      eo.reward = cfg.reward;
      const EvalSummary s = evaluate(policy, tasks, mode, eo);
      out << fmt::format(
          "eval tasks={} mode={} first_accuracy={:.4f} final_accuracy={:.4f} format_validity={:.4f} "
          "correction_rate={:.4f} mean_length={:.2f} mean_reward={:.4f}\n",
          s.tasks, to_string(mode), s.first_accuracy, s.final_accuracy, s.format_validity, s.correction_rate,
          s.mean_length, s.mean_reward);
      return kExitOk;
    }

    if (*score_cmd) {
      const FormatMode mode = cli::mode_or_throw(score_mode);
      std::string text = score_text;
      if (!score_file.empty()) {
        std::ifstream in = cli::open_in(score_file);
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
      } else if (!text_opt->count()) {
        throw InvalidConfig("score needs --response or --response-file");
      }
      const StructuredResponse parsed = parse(text, mode);
      const RewardBreakdown r = score(parsed, score_gold, RewardConfig{}, mode);
      out << fmt::format(
          "score well_formed={} first_answer={} second_answer={} r_format={} r_accuracy={} i_ref={} i_eff={} "
          "f_len={:.6f} r_total={:.6f} length={}\n",
          parsed.well_formed ? 1 : 0, parsed.first_answer.value_or("-"), parsed.second_answer.value_or("-"),
          r.r_format, r.r_accuracy, r.i_ref, r.i_eff, r.f_len, r.r_total, parsed.total_length);
      return kExitOk;
    }

    if (*verify_cmd) {
      const auto ids = acceptance::suite_ids(verify_suite);
      if (!ids) throw InvalidConfig("unknown suite '" + verify_suite + "' (formulas, training, all)");
      const acceptance::CliEntry self = [](const std::vector<std::string>& a) {
        std::ostringstream sink_out, sink_err;
        return run_cli(a, sink_out, sink_err);
      };
      const bool ok = acceptance::run_acceptance(*ids, self, out);
      out << fmt::format("verify suite={} result={}\n", verify_suite, ok ? "pass" : "fail");
      return ok ? kExitOk : kExitVerify;
    }

    out << app.help();
    return kExitOk;
  } catch (const InvalidConfig& e) {
    err << "srpo: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "srpo: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "srpo: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const InsufficientDiversity& e) {
    err << "srpo: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const UnknownContext& e) {
    err << "srpo: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const UnknownChoice& e) {
    err << "srpo: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "srpo: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace srpo

#endif  // SRPO_CLI_HPP_
