#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ctrrank/replay.hpp"
#include "ctrrank/simlog.hpp"

namespace ctrrank {

struct ExperimentConfig {
  WorldSpec world;
  HyperParams hyper;
  std::vector<std::string> policies;  // registry names, reporting order
  double reveal_interval = 300.0;
  int64_t split_ts = -1;  // -1: half of the horizon
  double epsilon = 0.0;
  std::string out_dir = "out";
  uint64_t seed = 1;
  bool emit_control_log = true;
  bool emit_ground_truth = false;
  int64_t instant_bucket_seconds = 21600;  // 6 simulated hours

  int64_t effective_split() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

// the built-in demo world: a drifting head-and-torso query cohort over a
// long-tailed query distribution; drift values derive from the seed's docs
WorldSpec default_drift_world(uint64_t seed = 1);
ExperimentConfig default_config(uint64_t seed = 1);

// log file locations under config.out_dir
std::string exploration_log_path(const ExperimentConfig& config);
std::string control_log_path(const ExperimentConfig& config);
std::string ground_truth_path(const ExperimentConfig& config);
std::string model_path(const ExperimentConfig& config, TrainSource source, bool no_bias);

// filesystem-safe policy name ("online(b,ws)" -> "online_b_ws")
std::string sanitize_policy_name(const std::string& name);

struct SimulateResult {
  std::string exploration_path;
  std::string control_path;      // empty when not emitted
  std::string ground_truth_path; // empty when not emitted
};

// generate the world and write the exploration log (plus optional control
// log and ground-truth sidecar)
SimulateResult cmd_simulate(const ExperimentConfig& config);

// fit a model from the training split of the configured logs and write it
// next to them; returns the model file path
std::string cmd_train(const ExperimentConfig& config, TrainSource source, bool no_bias = false);

// training sessions: ts < split; test sessions: ts >= split
std::vector<SessionRecord> split_train(const std::vector<SessionRecord>& log, int64_t split_ts);
std::vector<SessionRecord> split_test(const std::vector<SessionRecord>& log, int64_t split_ts);

std::vector<TrainingExample> extract_position1(const std::vector<SessionRecord>& log);
std::vector<TrainingExample> extract_top_s(const std::vector<SessionRecord>& log);

// materialize a registry variant; model files must already exist for batch
// and warm-started variants
Policy build_policy(const ExperimentConfig& config, const std::string& name);

struct ReplayOutcome {
  std::string name;
  ReplayReport report;
  std::map<std::string, SegmentStat> segments_impressions;
  std::map<std::string, SegmentStat> segments_length;
};

// replay the test split for every configured policy and write the comparison
// table, per-segment CSVs, click-metric CSV, and instantaneous-CTR series
std::vector<ReplayOutcome> cmd_replay(const ExperimentConfig& config);

// simulate, train every model the configured policies need, then replay
std::vector<ReplayOutcome> cmd_run(const ExperimentConfig& config);

}  // namespace ctrrank
