#include "ctrrank/session_log.hpp"

#include <fstream>

#include "ctrrank/errors.hpp"

namespace ctrrank {

const Candidate& SessionRecord::displayed_at(int p) const {
  require(p >= 1 && p <= s(), "displayed_at: position out of range");
  const int rank = shown_perm[static_cast<size_t>(p - 1)];
  return candidates[static_cast<size_t>(rank - 1)];
}

bool SessionRecord::identity_perm() const {
  for (size_t i = 0; i < shown_perm.size(); ++i) {
    if (shown_perm[i] != static_cast<int>(i) + 1) return false;
  }
  return true;
}

void SessionRecord::validate() const {
  const int n = s();
  require(n > 0, "SessionRecord: no candidates");
  require(!query_id.empty(), "SessionRecord: empty query id");
  require(static_cast<int>(shown_perm.size()) == n, "SessionRecord: perm length");
  require(static_cast<int>(clicks.size()) == n, "SessionRecord: clicks length");
  std::vector<bool> seen(static_cast<size_t>(n), false);
  for (int k : shown_perm) {
    require(k >= 1 && k <= n, "SessionRecord: perm entry out of range");
    require(!seen[static_cast<size_t>(k - 1)], "SessionRecord: perm not a permutation");
    seen[static_cast<size_t>(k - 1)] = true;
  }
  for (int i = 0; i < n; ++i) {
    const Candidate& c = candidates[static_cast<size_t>(i)];
    require(c.base_rank == i + 1, "SessionRecord: candidates must be in base-rank order");
    require(!c.key.doc_id.empty(), "SessionRecord: empty doc id");
    require(all_finite(c.x), "SessionRecord: non-finite feature value");
  }
  for (int c : clicks) require(c == 0 || c == 1, "SessionRecord: clicks must be 0/1");
}

nlohmann::json session_to_json(const SessionRecord& s) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& c : s.candidates) {
    docs.push_back(nlohmann::json{{"did", c.key.doc_id}, {"x", c.x}, {"base_rank", c.base_rank}});
  }
  return nlohmann::json{{"ts", s.ts},          {"qid", s.query_id}, {"qlen", s.query_length},
                        {"docs", std::move(docs)}, {"perm", s.shown_perm}, {"clicks", s.clicks}};
}

SessionRecord session_from_json(const nlohmann::json& j) {
  SessionRecord s;
  s.ts = j.at("ts").get<int64_t>();
  s.query_id = j.at("qid").get<std::string>();
  s.query_length = j.at("qlen").get<int>();
  for (const auto& dj : j.at("docs")) {
    Candidate c;
    c.key = PairKey{s.query_id, dj.at("did").get<std::string>()};
    c.x = dj.at("x").get<Vec>();
    c.base_rank = dj.at("base_rank").get<int>();
    s.candidates.push_back(std::move(c));
  }
  s.shown_perm = j.at("perm").get<std::vector<int>>();
  s.clicks = j.at("clicks").get<std::vector<int>>();
  s.validate();
  return s;
}

void write_session_log(const std::string& path, const std::vector<SessionRecord>& log) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write session log: " + path);
  for (const auto& s : log) out << session_to_json(s).dump() << '\n';
  if (!out) throw IoError("failed writing session log: " + path);
}

std::vector<SessionRecord> read_session_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read session log: " + path);
  std::vector<SessionRecord> log;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      log.push_back(session_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ":" + std::to_string(lineno) + ": bad session line: " + e.what());
    }
  }
  return log;
}

}  // namespace ctrrank
