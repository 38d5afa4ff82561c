#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <doctest.h>

// Process-level checks of the installed CLI. The binary path arrives via the
// CTRRANK_CLI environment variable set by CTest.

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("CTRRANK_CLI");
  REQUIRE_MESSAGE(env != nullptr, "CTRRANK_CLI not set");
  return env;
}

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "stdout.txt";
  const fs::path err_file = scratch / "stderr.txt";
  const std::string cmd =
      cli_path() + " " + args + " >" + out_file.string() + " 2>" + err_file.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.stdout_text = slurp(out_file);
  r.stderr_text = slurp(err_file);
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_tiny_config(const fs::path& path, const fs::path& out_dir) {
  std::ofstream cfg(path);
  cfg << R"json({
  "seed": 11,
  "world": {"n_queries": 25, "d": 4, "s": 4, "horizon": 9000,
            "sessions_per_second": 0.5, "zipf_exponent": 1.3,
            "drift_events": [{"query_id": "q00000", "doc_base_rank": 4,
                              "start_time": 6000, "new_ctr": 0.9}]},
  "policies": ["frmsc", "batch(b)", "online(b,ws)", "counting"],
  "out": ")json" << out_dir.string() << R"json("
})json";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate twice with one seed writes identical logs") {
  TempDir dir("ctrrank_cli_sim");
  const fs::path cfg = dir.path / "config.json";
  write_tiny_config(cfg, dir.path / "out");

  const auto first =
      run_cli("simulate --config " + cfg.string() + " --out " + (dir.path / "o1").string(), dir.path);
  CHECK(first.exit_code == 0);
  const auto second =
      run_cli("simulate --config " + cfg.string() + " --out " + (dir.path / "o2").string(), dir.path);
  CHECK(second.exit_code == 0);
  CHECK(slurp(dir.path / "o1" / "exploration_log.jsonl") ==
        slurp(dir.path / "o2" / "exploration_log.jsonl"));
}

TEST_CASE("missing inputs exit with the i/o code") {
  TempDir dir("ctrrank_cli_io");
  const fs::path cfg = dir.path / "config.json";
  write_tiny_config(cfg, dir.path / "out");
  const auto r = run_cli("train --config " + cfg.string() + " --source exploration@1 --out " +
                             (dir.path / "nothing_here").string(),
                         dir.path);
  CHECK(r.exit_code == 3);
}

TEST_CASE("unwritable output paths exit with the i/o code and name the path") {
  TempDir dir("ctrrank_cli_ro");
  const fs::path cfg = dir.path / "config.json";
  write_tiny_config(cfg, dir.path / "out");
  const auto r =
      run_cli("simulate --config " + cfg.string() + " --out /proc/ctrrank_nope/out", dir.path);
  CHECK(r.exit_code == 3);
  CHECK(r.stderr_text.find("/proc/ctrrank_nope/out") != std::string::npos);
}

TEST_CASE("a warm-start policy without its model exits with the config code") {
  TempDir dir("ctrrank_cli_cfg");
  const fs::path cfg = dir.path / "config.json";
  const fs::path out = dir.path / "out";
  write_tiny_config(cfg, out);
  CHECK(run_cli("simulate --config " + cfg.string(), dir.path).exit_code == 0);
  const auto r =
      run_cli("replay --config " + cfg.string() + " --policies \"online(b,ws)\"", dir.path);
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("online(b,ws)") != std::string::npos);
}

TEST_CASE("unknown policies and flags exit with the config code") {
  TempDir dir("ctrrank_cli_bad");
  const fs::path cfg = dir.path / "config.json";
  write_tiny_config(cfg, dir.path / "out");
  CHECK(run_cli("replay --config " + cfg.string() + " --policies nope", dir.path).exit_code == 2);
  CHECK(run_cli("simulate --no-such-flag", dir.path).exit_code == 2);
}

TEST_CASE("a corrupted log exits with the contract-violation code") {
  TempDir dir("ctrrank_cli_badlog");
  const fs::path cfg = dir.path / "config.json";
  const fs::path out = dir.path / "out";
  write_tiny_config(cfg, out);
  CHECK(run_cli("simulate --config " + cfg.string(), dir.path).exit_code == 0);

  // swap the last two lines (inside the replayed test split) so the
  // timestamps run backwards
  const fs::path log = out / "exploration_log.jsonl";
  std::vector<std::string> lines;
  {
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  REQUIRE(lines.size() >= 2);
  std::swap(lines[lines.size() - 1], lines[lines.size() - 2]);
  {
    std::ofstream outf(log, std::ios::trunc);
    for (const auto& line : lines) outf << line << '\n';
  }
  const auto r = run_cli("replay --config " + cfg.string() + " --policies frmsc", dir.path);
  CHECK(r.exit_code == 4);
}

TEST_CASE("run chains simulate, train and replay") {
  TempDir dir("ctrrank_cli_run");
  const fs::path cfg = dir.path / "config.json";
  const fs::path out = dir.path / "out";
  write_tiny_config(cfg, out);
  const auto r = run_cli("run --config " + cfg.string(), dir.path);
  CHECK(r.exit_code == 0);
  CHECK(r.stdout_text.find("frmsc") != std::string::npos);
  CHECK(fs::exists(out / "comparison_table.txt"));
  CHECK(fs::exists(out / "model_batch_b.json"));
  CHECK(fs::exists(out / "report_online_b_ws.json"));

  // four configured policies, four report rows
  std::istringstream table(slurp(out / "comparison_table.txt"));
  std::string line;
  int rows = 0;
  while (std::getline(table, line)) rows += 1;
  CHECK(rows == 2 + 4);  // header + rule + policies
}

TEST_CASE("help exits cleanly") {
  TempDir dir("ctrrank_cli_help");
  CHECK(run_cli("--help", dir.path).exit_code == 0);
}

}  // TEST_SUITE
