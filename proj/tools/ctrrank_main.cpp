#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctrrank/errors.hpp"
#include "ctrrank/experiment.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> policies;  // comma separated registry names
  std::optional<double> reveal_interval;
  std::optional<int64_t> split_ts;
  std::optional<double> epsilon;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& flags) {
  cmd->add_option("--config", flags.config_path, "experiment config JSON (default: built-in)");
  cmd->add_option("--seed", flags.seed, "master seed; overrides the config");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--policies", flags.policies, "comma-separated policy names");
  cmd->add_option("--reveal-interval", flags.reveal_interval,
                  "feedback reveal interval in simulated seconds");
  cmd->add_option("--split-ts", flags.split_ts, "train/test boundary timestamp");
  cmd->add_option("--epsilon", flags.epsilon, "exploration probability during replay");
}

ctrrank::ExperimentConfig resolve_config(const GlobalFlags& flags) {
  ctrrank::ExperimentConfig config =
      flags.config_path.empty()
          ? ctrrank::default_config(flags.seed.value_or(1))
          : ctrrank::ExperimentConfig::load(flags.config_path);
  if (flags.seed) {
    config.seed = *flags.seed;
    config.world.rng_seed = *flags.seed;
  }
  if (flags.out_dir) config.out_dir = *flags.out_dir;
  if (flags.policies) {
    // commas inside parentheses belong to the variant name: online(b,ws)
    config.policies.clear();
    std::string current;
    int depth = 0;
    for (char ch : *flags.policies) {
      if (ch == '(') depth += 1;
      if (ch == ')') depth -= 1;
      if (ch == ',' && depth == 0) {
        if (!current.empty()) config.policies.push_back(current);
        current.clear();
      } else {
        current.push_back(ch);
      }
    }
    if (!current.empty()) config.policies.push_back(current);
  }
  if (flags.reveal_interval) config.reveal_interval = *flags.reveal_interval;
  if (flags.split_ts) config.split_ts = *flags.split_ts;
  if (flags.epsilon) config.epsilon = *flags.epsilon;
  config.validate();
  return config;
}

ctrrank::TrainSource parse_source(const std::string& name) {
  if (name == "exploration@1") return ctrrank::TrainSource::exploration_at1;
  if (name == "control@1") return ctrrank::TrainSource::control_at1;
  if (name == "control@4") return ctrrank::TrainSource::control_at4;
  if (name == "control@4np") return ctrrank::TrainSource::control_at4_np;
  throw ctrrank::ConfigError(
      "unknown training source '" + name +
      "' (expected exploration@1, control@1, control@4 or control@4np)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"click-feedback re-ranking: simulate logs, train CTR models, replay policies"};
  app.require_subcommand(1);

  GlobalFlags flags;
  bool no_control = false;
  bool ground_truth = false;
  std::string train_source = "exploration@1";
  bool train_nb = false;

  CLI::App* simulate = app.add_subcommand("simulate", "generate exploration/control logs");
  add_global_flags(simulate, flags);
  simulate->add_flag("--no-control", no_control, "skip the control log");
  simulate->add_flag("--ground-truth", ground_truth, "emit the ground-truth sidecar");

  CLI::App* train = app.add_subcommand("train", "fit a batch model from the training split");
  add_global_flags(train, flags);
  train->add_option("--source", train_source,
                    "exploration@1 | control@1 | control@4 | control@4np");
  train->add_flag("--nb", train_nb, "drop the pair bias terms");

  CLI::App* replay_cmd = app.add_subcommand("replay", "replay the test split per policy");
  add_global_flags(replay_cmd, flags);

  CLI::App* run = app.add_subcommand("run", "simulate, train all needed models, then replay");
  add_global_flags(run, flags);
  run->add_flag("--ground-truth", ground_truth, "emit the ground-truth sidecar");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    ctrrank::ExperimentConfig config = resolve_config(flags);
    if (no_control) config.emit_control_log = false;
    if (ground_truth) config.emit_ground_truth = true;

    if (simulate->parsed()) {
      const auto result = ctrrank::cmd_simulate(config);
      std::cout << "wrote " << result.exploration_path << '\n';
      if (!result.control_path.empty()) std::cout << "wrote " << result.control_path << '\n';
      if (!result.ground_truth_path.empty())
        std::cout << "wrote " << result.ground_truth_path << '\n';
    } else if (train->parsed()) {
      const std::string path = ctrrank::cmd_train(config, parse_source(train_source), train_nb);
      std::cout << "wrote " << path << '\n';
    } else if (replay_cmd->parsed()) {
      ctrrank::cmd_replay(config);
    } else if (run->parsed()) {
      ctrrank::cmd_run(config);
    }
  } catch (const ctrrank::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const ctrrank::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const ctrrank::ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
