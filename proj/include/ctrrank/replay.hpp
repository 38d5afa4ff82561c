#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrrank/session_log.hpp"

namespace ctrrank {

// Fig. 8-style click metrics over matched sessions. Empty optionals mark
// undefined values (no matched sessions, or no clicked sessions for the RR
// family); they are never reported as 0.
struct ClickMetrics {
  std::optional<double> query_ctr;
  std::optional<double> one_minus_abandonment;
  std::optional<double> max_rr;
  std::optional<double> mean_rr;
  std::optional<double> min_rr;

  nlohmann::json to_json() const;
};

struct MatchedSession {
  int64_t ts = 0;
  std::string query_id;
  int query_length = 0;
  std::vector<int> clicks;  // aligned to displayed positions
};

struct QueryTally {
  int64_t impressions = 0;  // sessions of this query in the replayed log
  int query_length = 0;
  int64_t matches = 0;
  int64_t clicks_at1 = 0;
};

struct ReplayReport {
  int64_t match_count = 0;   // M
  int64_t click_count = 0;   // C
  int64_t sessions_processed = 0;
  ClickMetrics metrics;
  std::vector<MatchedSession> matched;
  std::map<std::string, QueryTally> per_query;

  std::optional<double> ctr1() const;
  nlohmann::json to_json() const;
};

// Test-side instrumentation hooks into the replay loop.
class ReplayObserver {
 public:
  virtual ~ReplayObserver() = default;
  virtual void after_scored(const SessionRecord& s, int proposed_base_rank, bool matched,
                            Policy& policy) {
    (void)s; (void)proposed_base_rank; (void)matched; (void)policy;
  }
  virtual void after_feedback(const SessionRecord& s, Policy& policy) { (void)s; (void)policy; }
};

// Replays a time-sorted exploration log against the policy: each session is
// scored first (match iff the policy's top pick equals the logged position-1
// document), and its position-1 click feedback is buffered and released to
// the policy at reveal_interval boundaries — match or not, always after
// scoring. reveal_interval 0 releases feedback immediately after each
// session is scored.
ReplayReport replay(Policy& policy, const std::vector<SessionRecord>& log,
                    double reveal_interval = 300.0, ReplayObserver* observer = nullptr);

ClickMetrics compute_click_metrics(const std::vector<MatchedSession>& matched);

enum class Segmentation { by_impressions, by_query_length };

struct SegmentStat {
  std::optional<double> ctr1_policy;
  std::optional<double> ctr1_baseline;
  std::optional<double> lift;  // (policy - baseline) / baseline
  int64_t matches_policy = 0;
  int64_t matches_baseline = 0;
};

// labels in display order for each segmentation
std::vector<std::string> segment_labels(Segmentation seg);

std::map<std::string, SegmentStat> segment_report(const ReplayReport& policy_report,
                                                  const ReplayReport& baseline_report,
                                                  Segmentation seg);

// Marginal CTR of the k-th-by-base-rank document at displayed position p,
// aggregated over the log, plus the identity-permutation diagonal (the
// production-order "control" line).
struct PositionalCtr {
  int s = 0;
  std::vector<std::vector<int64_t>> displays;  // [k][p], 0-based
  std::vector<std::vector<int64_t>> clicks;
  std::vector<int64_t> control_displays;  // [k], identity-perm sessions only
  std::vector<int64_t> control_clicks;

  std::optional<double> marginal(int k, int p) const;  // 0-based indices
  std::optional<double> control(int k) const;
  nlohmann::json to_json() const;
};

PositionalCtr positional_ctr_analysis(const std::vector<SessionRecord>& log);

}  // namespace ctrrank
