#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "ctrrank/errors.hpp"
#include "ctrrank/experiment.hpp"

using namespace ctrrank;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ExperimentConfig tiny_config(const std::string& out_dir, uint64_t seed = 9) {
  ExperimentConfig c;
  c.world.n_queries = 30;
  c.world.zipf_exponent = 1.3;
  c.world.d = 4;
  c.world.s = 4;
  c.world.pair_noise_sd = 0.5;
  c.world.position_gamma = 0.9;
  c.world.horizon = 12000;
  c.world.sessions_per_second = 0.5;
  c.world.drift_events = {{"q00000", 4, 8000, 0.9}};
  c.hyper = HyperParams::make(4, 4);
  c.policies = {"frmsc", "batch(b)", "online(b,ws)", "counting"};
  c.reveal_interval = 300.0;
  c.out_dir = out_dir;
  c.seed = seed;
  c.world.rng_seed = seed;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("a zero-session world writes a valid empty log") {
  TempDir dir("ctrrank_empty");
  ExperimentConfig c = tiny_config(dir.str());
  c.world.horizon = 1;
  c.world.sessions_per_second = 0.4;  // rounds to zero sessions
  c.world.drift_events.clear();
  const auto result = cmd_simulate(c);
  CHECK(read_session_log(result.exploration_path).empty());
}

TEST_CASE("training on an empty log warns and writes the priors") {
  TempDir dir("ctrrank_priors");
  ExperimentConfig c = tiny_config(dir.str());
  c.world.horizon = 1;
  c.world.sessions_per_second = 0.4;  // zero sessions
  c.world.drift_events.clear();
  cmd_simulate(c);
  const ModelState m = ModelState::load(cmd_train(c, TrainSource::exploration_at1, false));
  CHECK(m.to_json().dump() == ModelState::priors(c.hyper).to_json().dump());
}

TEST_CASE("simulate is reproducible byte for byte") {
  TempDir a("ctrrank_sim_a");
  TempDir b("ctrrank_sim_b");
  ExperimentConfig ca = tiny_config(a.str());
  ExperimentConfig cb = tiny_config(b.str());
  cmd_simulate(ca);
  cmd_simulate(cb);
  CHECK(slurp(exploration_log_path(ca)) == slurp(exploration_log_path(cb)));
  CHECK(slurp(control_log_path(ca)) == slurp(control_log_path(cb)));
}

TEST_CASE("the control log file holds identity permutations") {
  TempDir dir("ctrrank_ctrl");
  ExperimentConfig c = tiny_config(dir.str());
  cmd_simulate(c);
  const auto log = read_session_log(control_log_path(c));
  REQUIRE(!log.empty());
  for (const auto& s : log) CHECK(s.identity_perm());
}

TEST_CASE("training writes a loadable model equal to the direct solve") {
  TempDir dir("ctrrank_train");
  ExperimentConfig c = tiny_config(dir.str());
  cmd_simulate(c);
  const std::string path = cmd_train(c, TrainSource::exploration_at1, false);
  const ModelState model = ModelState::load(path);
  CHECK(model.d() == 4);

  const auto log = read_session_log(exploration_log_path(c));
  SufficientStats stats = SufficientStats::for_hyper(c.hyper);
  for (const auto& ex : extract_position1(split_train(log, c.effective_split()))) {
    stats.accumulate(ex);
  }
  const ModelState direct = solve(stats, c.hyper);
  CHECK(model.to_json().dump() == direct.to_json().dump());
}

TEST_CASE("position-blind control fits sit below position-aware ones") {
  // constructed log: identity display, an informative quality feature, and
  // clicks at position 1 only. The position-blind fit reads the lower
  // positions as genuine misses and drags the quality coefficient down; the
  // position-aware fit explains them with negative b_p instead.
  TempDir dir("ctrrank_np");
  ExperimentConfig c = tiny_config(dir.str());
  c.world.d = 3;
  c.hyper = HyperParams::make(3, 4);
  c.split_ts = 1000;

  Rng rng(77);
  std::vector<SessionRecord> log;
  for (int64_t ts = 0; ts < 1200; ++ts) {
    const int q = static_cast<int>(rng.next_below(60));
    SessionRecord rec;
    rec.ts = ts;
    rec.query_id = "q" + std::to_string(q);
    rec.query_length = 1;
    Rng docs(1000 + static_cast<uint64_t>(q));  // stable per-query docs
    std::vector<double> quality;
    for (int k = 0; k < 4; ++k) quality.push_back(0.15 + 0.7 * docs.next_unit());
    std::sort(quality.rbegin(), quality.rend());
    for (int k = 0; k < 4; ++k) {
      Candidate cand;
      cand.key = PairKey{rec.query_id, "d" + std::to_string(k)};
      cand.x = {1.0, quality[static_cast<size_t>(k)], docs.next_normal()};
      cand.base_rank = k + 1;
      rec.candidates.push_back(std::move(cand));
    }
    rec.shown_perm = {1, 2, 3, 4};
    rec.clicks = {rng.next_unit() < quality[0] ? 1 : 0, 0, 0, 0};
    log.push_back(std::move(rec));
  }
  std::filesystem::create_directories(dir.str());
  write_session_log(control_log_path(c), log);

  const ModelState with_pos = ModelState::load(cmd_train(c, TrainSource::control_at4, false));
  const ModelState no_pos = ModelState::load(cmd_train(c, TrainSource::control_at4_np, false));

  for (int p = 2; p <= 4; ++p) CHECK(with_pos.pos_bias[static_cast<size_t>(p - 1)] < 0.0);
  for (double b : no_pos.pos_bias) CHECK(b == 0.0);
  // without position terms the zero-click positions contaminate the fit and
  // drag the CTR@1 estimates down
  double sum_with = 0.0, sum_without = 0.0;
  int64_t n = 0;
  for (const auto& s : split_train(log, c.effective_split())) {
    for (const auto& cand : s.candidates) {
      sum_with += predict_ctr1(with_pos, cand.key, cand.x);
      sum_without += predict_ctr1(no_pos, cand.key, cand.x);
      n += 1;
    }
  }
  REQUIRE(n > 0);
  CHECK(sum_without / static_cast<double>(n) < sum_with / static_cast<double>(n));
}

TEST_CASE("a biasless world yields near-zero position estimates") {
  TempDir dir("ctrrank_gamma0");
  ExperimentConfig c = tiny_config(dir.str());
  c.world.position_gamma = 0.0;
  c.world.n_queries = 300;
  c.world.horizon = 60000;
  c.world.sessions_per_second = 0.5;
  c.world.base_rank_noise_sd = 1.0;  // rank-quality gradients would confound b_p
  c.world.drift_events.clear();
  cmd_simulate(c);
  const ModelState m = ModelState::load(cmd_train(c, TrainSource::control_at4, false));
  // ~60k training rows put the standard error of each position coefficient
  // near 0.008; stay within three of those
  for (int p = 2; p <= 4; ++p) {
    CHECK(std::fabs(m.pos_bias[static_cast<size_t>(p - 1)]) < 0.025);
  }
}

TEST_CASE("a frmsc-only replay reports zero lift") {
  TempDir dir("ctrrank_frmsc");
  ExperimentConfig c = tiny_config(dir.str());
  c.policies = {"frmsc"};
  cmd_simulate(c);
  const auto outcomes = cmd_replay(c);
  REQUIRE(outcomes.size() == 1);
  CHECK(outcomes[0].name == "frmsc");
  CHECK(outcomes[0].report.ctr1().has_value());
  const std::string table = slurp(dir.str() + "/comparison_table.txt");
  CHECK(table.find("frmsc") != std::string::npos);
  CHECK(table.find("+0.00%") != std::string::npos);
}

TEST_CASE("the full pipeline is deterministic across reruns") {
  TempDir a("ctrrank_run_a");
  TempDir b("ctrrank_run_b");
  ExperimentConfig ca = tiny_config(a.str());
  ExperimentConfig cb = tiny_config(b.str());
  cmd_run(ca);
  cmd_run(cb);
  for (const auto& entry : fs::directory_iterator(a.path)) {
    const std::string name = entry.path().filename().string();
    if (name == "resolved_config.json") continue;  // differs by out path only
    CHECK_MESSAGE(slurp(entry.path().string()) == slurp((b.path / name).string()), name);
  }
}

TEST_CASE("replaying a policy twice is stable") {
  TempDir dir("ctrrank_twice");
  ExperimentConfig c = tiny_config(dir.str());
  c.policies = {"counting"};
  cmd_simulate(c);
  const auto once = cmd_replay(c);
  const auto twice = cmd_replay(c);
  CHECK(once[0].report.to_json().dump() == twice[0].report.to_json().dump());
}

TEST_CASE("warm-start policies demand their model file by name") {
  TempDir dir("ctrrank_missing");
  ExperimentConfig c = tiny_config(dir.str());
  c.policies = {"online(b,ws)"};
  cmd_simulate(c);
  try {
    cmd_replay(c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("online(b,ws)") != std::string::npos);
  }
}

TEST_CASE("config validation rejects unknown names and bad splits") {
  TempDir dir("ctrrank_badcfg");
  ExperimentConfig c = tiny_config(dir.str());
  c.policies = {"not-a-policy"};
  CHECK_THROWS_AS(c.validate(), ConfigError);

  ExperimentConfig c2 = tiny_config(dir.str());
  c2.split_ts = 10 * c2.world.horizon;
  cmd_simulate(c2);
  CHECK_THROWS_AS(cmd_replay(c2), ConfigError);
}

TEST_CASE("config JSON round-trips") {
  ExperimentConfig c = tiny_config("somewhere", 123);
  const ExperimentConfig back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json().dump() == c.to_json().dump());

  // flags overlay defaults
  const auto j = nlohmann::json{{"seed", 5}, {"policies", nlohmann::json::array({"frmsc"})}};
  const ExperimentConfig mini = ExperimentConfig::from_json(j);
  CHECK(mini.seed == 5);
  CHECK(mini.world.rng_seed == 5);
  CHECK(mini.policies == std::vector<std::string>{"frmsc"});
  CHECK(mini.effective_split() == mini.world.horizon / 2);
}

TEST_CASE("policy names sanitize to filesystem-safe stems") {
  CHECK(sanitize_policy_name("frmsc") == "frmsc");
  CHECK(sanitize_policy_name("online(b,ws,w0)") == "online_b_ws_w0");
  CHECK(sanitize_policy_name("batch(control@4,np)") == "batch_control_4_np");
}

TEST_CASE("replay emits every report artifact") {
  TempDir dir("ctrrank_files");
  ExperimentConfig c = tiny_config(dir.str());
  cmd_run(c);
  for (const std::string name :
       {"comparison_table.txt", "segments_impressions.csv", "segments_length.csv",
        "click_metrics.csv", "instant_ctr.csv", "metrics_flat.csv", "report_frmsc.json",
        "report_online_b_ws.json"}) {
    CHECK_MESSAGE(fs::exists(dir.path / name), name);
  }
  const std::string csv = slurp(dir.str() + "/click_metrics.csv");
  CHECK(csv.find("policy,query_ctr") == 0);
}

}  // TEST_SUITE
