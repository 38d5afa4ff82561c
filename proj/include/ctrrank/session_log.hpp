#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrrank/policy.hpp"

namespace ctrrank {

// One logged search session. Candidates are listed in base-rank order
// (candidates[k-1].base_rank == k); shown_perm[i] = k means the candidate
// with base_rank k was displayed at position i+1; clicks align with
// displayed positions.
struct SessionRecord {
  int64_t ts = 0;
  std::string query_id;
  int query_length = 0;
  std::vector<Candidate> candidates;
  std::vector<int> shown_perm;
  std::vector<int> clicks;

  int s() const { return static_cast<int>(candidates.size()); }
  // the candidate displayed at 1-based position p
  const Candidate& displayed_at(int p) const;
  bool identity_perm() const;
  void validate() const;
};

nlohmann::json session_to_json(const SessionRecord& s);
SessionRecord session_from_json(const nlohmann::json& j);

// JSON Lines, one session per line
void write_session_log(const std::string& path, const std::vector<SessionRecord>& log);
std::vector<SessionRecord> read_session_log(const std::string& path);

}  // namespace ctrrank
