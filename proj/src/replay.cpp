#include "ctrrank/replay.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "ctrrank/errors.hpp"

namespace ctrrank {

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json ClickMetrics::to_json() const {
  return nlohmann::json{{"query_ctr", opt_json(query_ctr)},
                        {"one_minus_abandonment", opt_json(one_minus_abandonment)},
                        {"max_rr", opt_json(max_rr)},
                        {"mean_rr", opt_json(mean_rr)},
                        {"min_rr", opt_json(min_rr)}};
}

std::optional<double> ReplayReport::ctr1() const {
  if (match_count == 0) return std::nullopt;
  return static_cast<double>(click_count) / static_cast<double>(match_count);
}

nlohmann::json ReplayReport::to_json() const {
  return nlohmann::json{{"C", click_count},
                        {"M", match_count},
                        {"sessions_processed", sessions_processed},
                        {"ctr1", opt_json(ctr1())},
                        {"metrics", metrics.to_json()}};
}

ReplayReport replay(Policy& policy, const std::vector<SessionRecord>& log,
                    double reveal_interval, ReplayObserver* observer) {
  require(reveal_interval >= 0.0, "replay: reveal_interval must be non-negative");

  ReplayReport report;
  // (reveal boundary, session) buffered until the stream passes the boundary
  std::deque<std::pair<int64_t, const SessionRecord*>> pending;
  int64_t prev_ts = std::numeric_limits<int64_t>::min();

  const auto deliver = [&](const SessionRecord& s) {
    policy.feedback(s.candidates, s.shown_perm, s.clicks);
    if (observer) observer->after_feedback(s, policy);
  };

  for (const auto& session : log) {
    session.validate();
    require(session.ts >= prev_ts, "replay: log not sorted by timestamp");
    prev_ts = session.ts;
    if (const ModelState* m = policy.model()) {
      require(session.s() == m->hyper.s, "replay: session s disagrees with policy model");
    }
    if (const OnlineLearner* l = policy.learner()) {
      require(session.s() == l->hyper().s, "replay: session s disagrees with policy learner");
    }

    // feedback from reveal windows that closed strictly before this session
    while (!pending.empty() && session.ts > pending.front().first) {
      deliver(*pending.front().second);
      pending.pop_front();
    }

    const std::vector<int> perm = policy.rank(session.candidates);
    const int proposed = perm[0];
    const bool matched = proposed == session.shown_perm[0];
    report.sessions_processed += 1;
    auto& tally = report.per_query[session.query_id];
    tally.impressions += 1;
    tally.query_length = session.query_length;
    if (matched) {
      report.match_count += 1;
      report.click_count += session.clicks[0];
      tally.matches += 1;
      tally.clicks_at1 += session.clicks[0];
      report.matched.push_back(MatchedSession{session.ts, session.query_id,
                                              session.query_length, session.clicks});
    }
    if (observer) observer->after_scored(session, proposed, matched, policy);

    // every session's position-1 click is revealed, match or not
    if (reveal_interval == 0.0) {
      deliver(session);
    } else {
      const int64_t width = static_cast<int64_t>(reveal_interval);
      // window (k*T, (k+1)*T] closes at (k+1)*T
      const int64_t boundary =
          (session.ts % width == 0) ? session.ts : (session.ts / width + 1) * width;
      pending.emplace_back(boundary, &session);
    }
  }

  report.metrics = compute_click_metrics(report.matched);
  return report;
}

ClickMetrics compute_click_metrics(const std::vector<MatchedSession>& matched) {
  ClickMetrics out;
  if (matched.empty()) return out;

  // per-query averages of per-session click counts
  std::map<std::string, std::pair<double, int64_t>> query_clicks;  // sum, count
  int64_t clicked_sessions = 0;
  double sum_max_rr = 0.0, sum_mean_rr = 0.0, sum_min_rr = 0.0;

  for (const auto& m : matched) {
    int total = 0;
    int first = -1, last = -1;
    double rr_sum = 0.0;
    for (size_t i = 0; i < m.clicks.size(); ++i) {
      if (!m.clicks[i]) continue;
      total += 1;
      const int p = static_cast<int>(i) + 1;
      if (first < 0) first = p;
      last = p;
      rr_sum += 1.0 / p;
    }
    auto& [sum, count] = query_clicks[m.query_id];
    sum += total;
    count += 1;
    if (total > 0) {
      clicked_sessions += 1;
      sum_max_rr += 1.0 / first;  // highest-ranked click
      sum_min_rr += 1.0 / last;   // lowest-ranked click
      sum_mean_rr += rr_sum / total;
    }
  }

  double qctr = 0.0;
  for (const auto& [qid, sc] : query_clicks) qctr += sc.first / static_cast<double>(sc.second);
  out.query_ctr = qctr / static_cast<double>(query_clicks.size());
  out.one_minus_abandonment =
      static_cast<double>(clicked_sessions) / static_cast<double>(matched.size());
  if (clicked_sessions > 0) {
    out.max_rr = sum_max_rr / static_cast<double>(clicked_sessions);
    out.mean_rr = sum_mean_rr / static_cast<double>(clicked_sessions);
    out.min_rr = sum_min_rr / static_cast<double>(clicked_sessions);
  }
  return out;
}

std::vector<std::string> segment_labels(Segmentation seg) {
  if (seg == Segmentation::by_impressions) return {"1", "2", "3-10", "11-100", ">100"};
  return {"1", "2", "3", "4", ">=5"};
}

namespace {

std::string segment_of(Segmentation seg, const QueryTally& t) {
  if (seg == Segmentation::by_impressions) {
    if (t.impressions <= 1) return "1";
    if (t.impressions == 2) return "2";
    if (t.impressions <= 10) return "3-10";
    if (t.impressions <= 100) return "11-100";
    return ">100";
  }
  if (t.query_length <= 1) return "1";
  if (t.query_length == 2) return "2";
  if (t.query_length == 3) return "3";
  if (t.query_length == 4) return "4";
  return ">=5";
}

}  // namespace

std::map<std::string, SegmentStat> segment_report(const ReplayReport& policy_report,
                                                  const ReplayReport& baseline_report,
                                                  Segmentation seg) {
  struct Acc {
    int64_t m_pol = 0, c_pol = 0, m_base = 0, c_base = 0;
  };
  std::map<std::string, Acc> acc;
  for (const std::string& label : segment_labels(seg)) acc[label];

  // both reports replayed the same log, so per-query impressions agree;
  // bucket by the policy report's view of the query
  for (const auto& [qid, tally] : policy_report.per_query) {
    Acc& a = acc[segment_of(seg, tally)];
    a.m_pol += tally.matches;
    a.c_pol += tally.clicks_at1;
    const auto bit = baseline_report.per_query.find(qid);
    if (bit != baseline_report.per_query.end()) {
      a.m_base += bit->second.matches;
      a.c_base += bit->second.clicks_at1;
    }
  }
  for (const auto& [qid, tally] : baseline_report.per_query) {
    if (!policy_report.per_query.contains(qid)) {
      Acc& a = acc[segment_of(seg, tally)];
      a.m_base += tally.matches;
      a.c_base += tally.clicks_at1;
    }
  }

  std::map<std::string, SegmentStat> out;
  for (const auto& [label, a] : acc) {
    SegmentStat st;
    st.matches_policy = a.m_pol;
    st.matches_baseline = a.m_base;
    if (a.m_pol > 0) st.ctr1_policy = static_cast<double>(a.c_pol) / a.m_pol;
    if (a.m_base > 0) st.ctr1_baseline = static_cast<double>(a.c_base) / a.m_base;
    if (st.ctr1_policy && st.ctr1_baseline && *st.ctr1_baseline > 0.0) {
      st.lift = (*st.ctr1_policy - *st.ctr1_baseline) / *st.ctr1_baseline;
    }
    out[label] = st;
  }
  return out;
}

std::optional<double> PositionalCtr::marginal(int k, int p) const {
  const int64_t n = displays[static_cast<size_t>(k)][static_cast<size_t>(p)];
  if (n == 0) return std::nullopt;
  return static_cast<double>(clicks[static_cast<size_t>(k)][static_cast<size_t>(p)]) /
         static_cast<double>(n);
}

std::optional<double> PositionalCtr::control(int k) const {
  const int64_t n = control_displays[static_cast<size_t>(k)];
  if (n == 0) return std::nullopt;
  return static_cast<double>(control_clicks[static_cast<size_t>(k)]) / static_cast<double>(n);
}

nlohmann::json PositionalCtr::to_json() const {
  nlohmann::json marg = nlohmann::json::array();
  for (int k = 0; k < s; ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < s; ++p) row.push_back(opt_json(marginal(k, p)));
    marg.push_back(std::move(row));
  }
  nlohmann::json ctrl = nlohmann::json::array();
  for (int k = 0; k < s; ++k) ctrl.push_back(opt_json(control(k)));
  return nlohmann::json{{"s", s}, {"marginal", std::move(marg)}, {"control", std::move(ctrl)}};
}

PositionalCtr positional_ctr_analysis(const std::vector<SessionRecord>& log) {
  PositionalCtr out;
  if (log.empty()) return out;
  const int s = log.front().s();
  out.s = s;
  out.displays.assign(static_cast<size_t>(s), std::vector<int64_t>(static_cast<size_t>(s), 0));
  out.clicks.assign(static_cast<size_t>(s), std::vector<int64_t>(static_cast<size_t>(s), 0));
  out.control_displays.assign(static_cast<size_t>(s), 0);
  out.control_clicks.assign(static_cast<size_t>(s), 0);

  for (const auto& session : log) {
    session.validate();
    require(session.s() == s, "positional_ctr_analysis: inconsistent s");
    const bool identity = session.identity_perm();
    for (int p = 1; p <= s; ++p) {
      const int k = session.shown_perm[static_cast<size_t>(p - 1)];
      out.displays[static_cast<size_t>(k - 1)][static_cast<size_t>(p - 1)] += 1;
      out.clicks[static_cast<size_t>(k - 1)][static_cast<size_t>(p - 1)] +=
          session.clicks[static_cast<size_t>(p - 1)];
      if (identity) {
        out.control_displays[static_cast<size_t>(k - 1)] += 1;
        out.control_clicks[static_cast<size_t>(k - 1)] += session.clicks[static_cast<size_t>(p - 1)];
      }
    }
  }
  return out;
}

}  // namespace ctrrank
