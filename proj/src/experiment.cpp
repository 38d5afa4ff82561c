#include "ctrrank/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ctrrank/errors.hpp"

namespace ctrrank {

namespace fs = std::filesystem;

int64_t ExperimentConfig::effective_split() const {
  return split_ts >= 0 ? split_ts : world.horizon / 2;
}

void ExperimentConfig::validate() const {
  world.validate();
  hyper.validate();
  require(hyper.d() == world.d, "config: hyper dimension disagrees with world");
  require(hyper.s == world.s, "config: hyper s disagrees with world");
  require(reveal_interval >= 0.0, "config: reveal_interval must be non-negative");
  require(epsilon >= 0.0 && epsilon <= 1.0, "config: epsilon must be in [0,1]");
  require(instant_bucket_seconds > 0, "config: instant_bucket_seconds must be positive");
  for (const auto& name : policies) {
    if (!find_policy_variant(name)) throw ConfigError("unknown policy: " + name);
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  return nlohmann::json{{"seed", seed},
                        {"world", world.to_json()},
                        {"hyper", hyper.to_json()},
                        {"policies", policies},
                        {"reveal_interval", reveal_interval},
                        {"split_ts", split_ts},
                        {"epsilon", epsilon},
                        {"out", out_dir},
                        {"control_log", emit_control_log},
                        {"ground_truth", emit_ground_truth},
                        {"instant_bucket_seconds", instant_bucket_seconds}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("world")) {
    c.world = WorldSpec::from_json(j.at("world"));
    c.seed = j.value("seed", c.world.rng_seed);
    c.world.rng_seed = c.seed;
  } else {
    c.seed = j.value("seed", uint64_t{1});
    c.world = default_drift_world(c.seed);
  }

  c.hyper = HyperParams::make(c.world.d, c.world.s);
  if (j.contains("hyper")) {
    const auto& hj = j.at("hyper");
    c.hyper.lambda1 = hj.value("lambda1", c.hyper.lambda1);
    c.hyper.lambda2 = hj.value("lambda2", c.hyper.lambda2);
    c.hyper.lambda3 = hj.value("lambda3", c.hyper.lambda3);
    c.hyper.b0 = hj.value("b0", c.hyper.b0);
    if (hj.contains("beta0")) c.hyper.beta0 = hj.at("beta0").get<Vec>();
    if (hj.contains("bp0")) c.hyper.bp0 = hj.at("bp0").get<Vec>();
    if (hj.contains("s")) c.hyper.s = hj.at("s").get<int>();
  }

  if (j.contains("policies")) {
    c.policies = j.at("policies").get<std::vector<std::string>>();
  } else {
    for (const auto& spec : policy_registry()) c.policies.push_back(spec.name);
  }
  c.reveal_interval = j.value("reveal_interval", c.reveal_interval);
  c.split_ts = j.value("split_ts", c.split_ts);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.out_dir = j.value("out", c.out_dir);
  c.emit_control_log = j.value("control_log", c.emit_control_log);
  c.emit_ground_truth = j.value("ground_truth", c.emit_ground_truth);
  c.instant_bucket_seconds = j.value("instant_bucket_seconds", c.instant_bucket_seconds);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": bad config JSON: " + e.what());
  }
  return from_json(j);
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

WorldSpec default_drift_world(uint64_t seed) {
  WorldSpec w;
  w.n_queries = 3000;
  w.zipf_exponent = 1.1;
  w.d = 16;
  w.s = 4;
  w.pair_noise_sd = 0.75;
  w.position_gamma = 0.9;
  w.base_rank_noise_sd = 0.3;
  w.horizon = 518400;  // 6 simulated days
  w.sessions_per_second = 0.08;
  w.rng_seed = seed;

  // A breaking-news cohort: one head query plus a torso band change intent
  // mid-stream. Post-drift click rates follow a rotated weight vector on the
  // same features, so the change is learnable from clicks rather than only
  // by per-pair memorization. The world is generated once without events to
  // obtain the docs; the event list does not perturb the generator's random
  // stream, so the final world carries the same features.
  const World base = World::generate(w);
  Vec w_post = base.spec().true_weights;
  // intent shift: two previously minor feature directions become dominant
  w_post[static_cast<size_t>(w.d - 2)] += 1.5;
  w_post[static_cast<size_t>(w.d - 1)] -= 1.5;
  // one head query, a torso band (per-pair data exists, biases can follow),
  // and a broad tail band where only the shared coefficients can generalize
  std::vector<int> cohort = {4};
  for (int qi = 10; qi < 40; ++qi) cohort.push_back(qi);
  for (int qi = 230; qi < w.n_queries; ++qi) cohort.push_back(qi);
  for (size_t idx = 0; idx < cohort.size(); ++idx) {
    const auto& q = base.query(cohort[idx]);
    // staggered onsets across the second half of the stream
    const int64_t t0 = w.horizon / 2 +
                       static_cast<int64_t>(idx) * (w.horizon * 2 / 5) /
                           static_cast<int64_t>(cohort.size());
    for (int rank = 1; rank <= w.s; ++rank) {
      const auto& doc = q.docs[static_cast<size_t>(rank - 1)];
      w.drift_events.push_back(
          DriftEvent{q.query_id, rank, t0, sigmoid(dot(w_post, doc.x))});
    }
  }
  return w;
}

ExperimentConfig default_config(uint64_t seed) {
  ExperimentConfig c;
  c.world = default_drift_world(seed);
  c.seed = seed;
  c.hyper = HyperParams::make(c.world.d, c.world.s);
  for (const auto& spec : policy_registry()) c.policies.push_back(spec.name);
  return c;
}

std::string exploration_log_path(const ExperimentConfig& config) {
  return config.out_dir + "/exploration_log.jsonl";
}

std::string control_log_path(const ExperimentConfig& config) {
  return config.out_dir + "/control_log.jsonl";
}

std::string ground_truth_path(const ExperimentConfig& config) {
  return config.out_dir + "/ground_truth.jsonl";
}

std::string model_path(const ExperimentConfig& config, TrainSource source, bool no_bias) {
  std::string stem;
  switch (source) {
    case TrainSource::exploration_at1: stem = no_bias ? "model_batch_nb" : "model_batch_b"; break;
    case TrainSource::control_at1:     stem = "model_control_at1"; break;
    case TrainSource::control_at4:     stem = "model_control_at4"; break;
    case TrainSource::control_at4_np:  stem = "model_control_at4np"; break;
    case TrainSource::none:            throw ConfigError("no model file for this source");
  }
  if (no_bias && source != TrainSource::exploration_at1) stem += "_nb";
  return config.out_dir + "/" + stem + ".json";
}

std::string sanitize_policy_name(const std::string& name) {
  std::string out;
  bool pending_sep = false;
  for (char ch : name) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(ch);
    } else {
      pending_sep = true;
    }
  }
  return out;
}

namespace {

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

constexpr uint64_t kExplorationStream = 0xE1;
constexpr uint64_t kControlStream = 0xC0;

uint64_t policy_seed(const ExperimentConfig& config, const std::string& name) {
  uint64_t h = 1469598103934665603ULL;  // FNV-1a over the variant name
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return Rng::mix(config.seed, h);
}

void check_split(const std::vector<SessionRecord>& log, int64_t split) {
  require(!log.empty(), "empty session log");
  if (split <= log.front().ts || split > log.back().ts) {
    throw ConfigError("split boundary " + std::to_string(split) +
                      " outside the log's time range [" + std::to_string(log.front().ts) + ", " +
                      std::to_string(log.back().ts) + "]");
  }
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_double(*v) : "NA"; }

}  // namespace

SimulateResult cmd_simulate(const ExperimentConfig& config) {
  config.validate();
  ensure_out_dir(config.out_dir);
  const World world = World::generate(config.world);

  SimulateResult result;
  result.exploration_path = exploration_log_path(config);
  write_session_log(result.exploration_path,
                    generate_exploration_log(world, Rng::mix(config.seed, kExplorationStream)));
  if (config.emit_control_log) {
    result.control_path = control_log_path(config);
    write_session_log(result.control_path,
                      generate_control_log(world, Rng::mix(config.seed, kControlStream)));
  }
  if (config.emit_ground_truth) {
    result.ground_truth_path = ground_truth_path(config);
    write_ground_truth(result.ground_truth_path, world);
  }

  std::ofstream cfg(config.out_dir + "/resolved_config.json");
  if (!cfg) throw IoError("cannot write resolved config");
  cfg << config.to_json().dump(2) << '\n';
  return result;
}

std::vector<SessionRecord> split_train(const std::vector<SessionRecord>& log, int64_t split_ts) {
  std::vector<SessionRecord> out;
  for (const auto& s : log) {
    if (s.ts < split_ts) out.push_back(s);
  }
  return out;
}

std::vector<SessionRecord> split_test(const std::vector<SessionRecord>& log, int64_t split_ts) {
  std::vector<SessionRecord> out;
  for (const auto& s : log) {
    if (s.ts >= split_ts) out.push_back(s);
  }
  return out;
}

std::vector<TrainingExample> extract_position1(const std::vector<SessionRecord>& log) {
  std::vector<TrainingExample> out;
  out.reserve(log.size());
  for (const auto& s : log) {
    const Candidate& top = s.displayed_at(1);
    out.push_back(TrainingExample{top.key, top.x, s.clicks[0], 1});
  }
  return out;
}

std::vector<TrainingExample> extract_top_s(const std::vector<SessionRecord>& log) {
  std::vector<TrainingExample> out;
  for (const auto& s : log) {
    for (int p = 1; p <= s.s(); ++p) {
      const Candidate& c = s.displayed_at(p);
      out.push_back(TrainingExample{c.key, c.x, s.clicks[static_cast<size_t>(p - 1)], p});
    }
  }
  return out;
}

std::string cmd_train(const ExperimentConfig& config, TrainSource source, bool no_bias) {
  config.validate();
  require(source != TrainSource::none, "cmd_train: a training source is required");

  const bool control = source != TrainSource::exploration_at1;
  const std::string log_path = control ? control_log_path(config) : exploration_log_path(config);
  const std::vector<SessionRecord> log = read_session_log(log_path);
  if (!log.empty()) check_split(log, config.effective_split());
  const std::vector<SessionRecord> train = split_train(log, config.effective_split());

  ModelState model;
  if (train.empty()) {
    std::cerr << "warning: empty training extraction, writing prior model\n";
    model = ModelState::priors(config.hyper);
  } else if (source == TrainSource::control_at4) {
    model = solve_with_positions(extract_top_s(train), config.hyper, false);
  } else if (source == TrainSource::control_at4_np) {
    model = solve_with_positions(extract_top_s(train), config.hyper, true);
  } else {
    SufficientStats stats = SufficientStats::for_hyper(config.hyper);
    for (const auto& ex : extract_position1(train)) stats.accumulate(ex);
    model = no_bias ? solve_no_bias(stats, config.hyper) : solve(stats, config.hyper);
  }

  const std::string path = model_path(config, source, no_bias);
  ensure_out_dir(config.out_dir);
  model.save(path);
  return path;
}

Policy build_policy(const ExperimentConfig& config, const std::string& name) {
  const PolicyVariantSpec* variant = find_policy_variant(name);
  if (!variant) throw ConfigError("unknown policy: " + name);
  const uint64_t seed = policy_seed(config, name);

  switch (variant->kind) {
    case PolicyKind::baseline_frmsc:
      return Policy::baseline(config.epsilon, seed);
    case PolicyKind::counting:
      return Policy::counting(config.epsilon, seed);
    case PolicyKind::batch: {
      const std::string path = model_path(config, variant->source, !variant->use_bias);
      if (!fs::exists(path)) {
        throw ConfigError("policy " + name + " needs model file " + path +
                          " (run the train command first)");
      }
      return Policy::batch_model(ModelState::load(path), config.epsilon, seed);
    }
    case PolicyKind::online: {
      LearnerOptions opts;
      opts.freeze_beta = variant->freeze_beta;
      opts.use_pair_bias = variant->use_bias;
      if (variant->warm_start) {
        const std::string path = model_path(config, variant->source, !variant->use_bias);
        if (!fs::exists(path)) {
          throw ConfigError("policy " + name + " needs warm-start file " + path +
                            " (run the train command first)");
        }
        return Policy::online_learner(
            OnlineLearner(ModelState::load(path), config.hyper, opts), config.epsilon, seed);
      }
      return Policy::online_learner(OnlineLearner(config.hyper, opts), config.epsilon, seed);
    }
  }
  throw ConfigError("unknown policy kind for " + name);
}

namespace {

void write_comparison_table(const ExperimentConfig& config,
                            const std::vector<ReplayOutcome>& outcomes,
                            const std::optional<double>& baseline_ctr1) {
  std::ostringstream table;
  table << "algorithm             nCTR@1    lift over frmsc\n";
  table << "---------------------------------------------\n";
  for (const auto& oc : outcomes) {
    const auto ctr = oc.report.ctr1();
    std::ostringstream line;
    line << oc.name;
    for (size_t i = oc.name.size(); i < 22; ++i) line << ' ';
    if (ctr) {
      line << std::fixed;
      line.precision(4);
      line << *ctr << "    ";
      if (baseline_ctr1 && *baseline_ctr1 > 0.0) {
        const double lift = (*ctr - *baseline_ctr1) / *baseline_ctr1 * 100.0;
        line.precision(2);
        line << (lift >= 0 ? "+" : "") << lift << "%";
      } else {
        line << "NA";
      }
    } else {
      line << "NA        NA";
    }
    table << line.str() << '\n';
  }
  const std::string text = table.str();
  std::cout << text;
  std::ofstream out(config.out_dir + "/comparison_table.txt");
  if (!out) throw IoError("cannot write comparison table");
  out << text;
}

void write_segment_csv(const std::string& path, const std::vector<ReplayOutcome>& outcomes,
                       Segmentation seg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "policy,segment,ctr1,baseline_ctr1,lift,matches\n";
  for (const auto& oc : outcomes) {
    const auto& segments =
        seg == Segmentation::by_impressions ? oc.segments_impressions : oc.segments_length;
    for (const std::string& label : segment_labels(seg)) {
      const auto it = segments.find(label);
      if (it == segments.end()) continue;
      const SegmentStat& st = it->second;
      out << oc.name << ',' << label << ',' << fmt_opt(st.ctr1_policy) << ','
          << fmt_opt(st.ctr1_baseline) << ',' << fmt_opt(st.lift) << ',' << st.matches_policy
          << '\n';
    }
  }
}

void write_click_metrics_csv(const std::string& path,
                             const std::vector<ReplayOutcome>& outcomes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "policy,query_ctr,one_minus_abandonment,max_rr,mean_rr,min_rr\n";
  for (const auto& oc : outcomes) {
    const ClickMetrics& m = oc.report.metrics;
    out << oc.name << ',' << fmt_opt(m.query_ctr) << ',' << fmt_opt(m.one_minus_abandonment)
        << ',' << fmt_opt(m.max_rr) << ',' << fmt_opt(m.mean_rr) << ',' << fmt_opt(m.min_rr)
        << '\n';
  }
}

void write_instant_ctr_csv(const std::string& path, const std::vector<ReplayOutcome>& outcomes,
                           int64_t bucket_seconds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "policy,bucket_start,matches,clicks,ctr1\n";
  for (const auto& oc : outcomes) {
    std::map<int64_t, std::pair<int64_t, int64_t>> buckets;  // start -> (M, C)
    for (const auto& m : oc.report.matched) {
      const int64_t start = (m.ts / bucket_seconds) * bucket_seconds;
      auto& [mm, cc] = buckets[start];
      mm += 1;
      int click1 = m.clicks.empty() ? 0 : m.clicks[0];
      cc += click1;
    }
    for (const auto& [start, mc] : buckets) {
      out << oc.name << ',' << start << ',' << mc.first << ',' << mc.second << ','
          << fmt_double(static_cast<double>(mc.second) / static_cast<double>(mc.first)) << '\n';
    }
  }
}

void write_flat_csv(const std::string& path, const std::vector<ReplayOutcome>& outcomes,
                    const std::optional<double>& baseline_ctr1) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "policy,metric,segment,value\n";
  for (const auto& oc : outcomes) {
    const auto ctr = oc.report.ctr1();
    out << oc.name << ",ctr1,," << fmt_opt(ctr) << '\n';
    if (ctr && baseline_ctr1 && *baseline_ctr1 > 0.0) {
      out << oc.name << ",lift,,"
          << fmt_double((*ctr - *baseline_ctr1) / *baseline_ctr1) << '\n';
    } else {
      out << oc.name << ",lift,,NA\n";
    }
    const ClickMetrics& m = oc.report.metrics;
    out << oc.name << ",query_ctr,," << fmt_opt(m.query_ctr) << '\n';
    out << oc.name << ",one_minus_abandonment,," << fmt_opt(m.one_minus_abandonment) << '\n';
    out << oc.name << ",max_rr,," << fmt_opt(m.max_rr) << '\n';
    out << oc.name << ",mean_rr,," << fmt_opt(m.mean_rr) << '\n';
    out << oc.name << ",min_rr,," << fmt_opt(m.min_rr) << '\n';
    for (const auto seg : {Segmentation::by_impressions, Segmentation::by_query_length}) {
      const auto& segments =
          seg == Segmentation::by_impressions ? oc.segments_impressions : oc.segments_length;
      const std::string prefix =
          seg == Segmentation::by_impressions ? "ctr1_by_impressions" : "ctr1_by_length";
      for (const std::string& label : segment_labels(seg)) {
        const auto it = segments.find(label);
        if (it == segments.end()) continue;
        out << oc.name << ',' << prefix << ',' << label << ',' << fmt_opt(it->second.ctr1_policy)
            << '\n';
        out << oc.name << ',' << prefix << "_lift," << label << ',' << fmt_opt(it->second.lift)
            << '\n';
      }
    }
  }
}

}  // namespace

std::vector<ReplayOutcome> cmd_replay(const ExperimentConfig& config) {
  config.validate();
  require(!config.policies.empty(), "cmd_replay: no policies configured");
  ensure_out_dir(config.out_dir);

  const std::vector<SessionRecord> log = read_session_log(exploration_log_path(config));
  check_split(log, config.effective_split());
  const std::vector<SessionRecord> test = split_test(log, config.effective_split());

  // lifts are against frmsc; replay it regardless of whether it is configured
  Policy baseline = build_policy(config, "frmsc");
  const ReplayReport baseline_report = replay(baseline, test, config.reveal_interval);

  std::vector<ReplayOutcome> outcomes;
  for (const auto& name : config.policies) {
    ReplayOutcome oc;
    oc.name = name;
    if (name == "frmsc") {
      oc.report = baseline_report;
    } else {
      Policy policy = build_policy(config, name);
      oc.report = replay(policy, test, config.reveal_interval);
    }
    oc.segments_impressions =
        segment_report(oc.report, baseline_report, Segmentation::by_impressions);
    oc.segments_length = segment_report(oc.report, baseline_report, Segmentation::by_query_length);
    outcomes.push_back(std::move(oc));
  }

  for (const auto& oc : outcomes) {
    std::ofstream out(config.out_dir + "/report_" + sanitize_policy_name(oc.name) + ".json");
    if (!out) throw IoError("cannot write replay report");
    nlohmann::json j = oc.report.to_json();
    const auto segment_json = [](const std::map<std::string, SegmentStat>& segments) {
      nlohmann::json s = nlohmann::json::object();
      for (const auto& [label, st] : segments) {
        s[label] = nlohmann::json{
            {"ctr1", st.ctr1_policy ? nlohmann::json(*st.ctr1_policy) : nlohmann::json(nullptr)},
            {"lift", st.lift ? nlohmann::json(*st.lift) : nlohmann::json(nullptr)},
            {"matches", st.matches_policy}};
      }
      return s;
    };
    j["per_segment"] = nlohmann::json{{"by_impressions", segment_json(oc.segments_impressions)},
                                      {"by_query_length", segment_json(oc.segments_length)}};
    out << j.dump(2) << '\n';
  }
  write_comparison_table(config, outcomes, baseline_report.ctr1());
  write_segment_csv(config.out_dir + "/segments_impressions.csv", outcomes,
                    Segmentation::by_impressions);
  write_segment_csv(config.out_dir + "/segments_length.csv", outcomes,
                    Segmentation::by_query_length);
  write_click_metrics_csv(config.out_dir + "/click_metrics.csv", outcomes);
  write_instant_ctr_csv(config.out_dir + "/instant_ctr.csv", outcomes,
                        config.instant_bucket_seconds);
  write_flat_csv(config.out_dir + "/metrics_flat.csv", outcomes, baseline_report.ctr1());
  return outcomes;
}

std::vector<ReplayOutcome> cmd_run(const ExperimentConfig& config) {
  ExperimentConfig effective = config;
  // make sure the control log exists when any control-trained policy is on
  for (const auto& name : config.policies) {
    const PolicyVariantSpec* variant = find_policy_variant(name);
    if (variant && (variant->source == TrainSource::control_at1 ||
                    variant->source == TrainSource::control_at4 ||
                    variant->source == TrainSource::control_at4_np)) {
      effective.emit_control_log = true;
    }
  }
  cmd_simulate(effective);

  std::set<std::pair<TrainSource, bool>> needed;
  for (const auto& name : effective.policies) {
    const PolicyVariantSpec* variant = find_policy_variant(name);
    if (!variant) throw ConfigError("unknown policy: " + name);
    if (variant->kind == PolicyKind::batch ||
        (variant->kind == PolicyKind::online && variant->warm_start)) {
      needed.emplace(variant->source, !variant->use_bias);
    }
  }
  for (const auto& [source, nb] : needed) cmd_train(effective, source, nb);
  return cmd_replay(effective);
}

}  // namespace ctrrank
