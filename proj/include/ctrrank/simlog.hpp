#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrrank/session_log.hpp"

namespace ctrrank {

// A scheduled step change of one document's true CTR@1.
struct DriftEvent {
  std::string query_id;
  int doc_base_rank = 0;  // 1-based, by the baseline order
  int64_t start_time = 0;
  double new_ctr = 0.0;
};

struct WorldSpec {
  int n_queries = 3000;
  double zipf_exponent = 1.5;   // query popularity
  int d = 12;                   // feature dimension
  int s = 4;                    // docs per query
  Vec true_weights;             // size d; empty -> a fixed default pattern
  double pair_noise_sd = 0.5;   // per-pair deviation from the linear score
  double position_gamma = 0.9;  // click factor p^-gamma
  double base_rank_noise_sd = 0.15;  // noise on true CTR when assigning base ranks
  std::vector<DriftEvent> drift_events;
  int64_t horizon = 518400;  // 6 days of simulated seconds
  double sessions_per_second = 0.05;
  uint64_t rng_seed = 1;

  int64_t session_count() const;
  void validate() const;

  nlohmann::json to_json() const;
  static WorldSpec from_json(const nlohmann::json& j);
};

struct WorldDoc {
  std::string doc_id;
  FeatureVector x;
  int base_rank = 0;
  // piecewise-constant true CTR@1: (from_ts, value), sorted, first entry at 0
  std::vector<std::pair<int64_t, double>> ctr_segments;

  double true_ctr1(int64_t t) const;
};

struct WorldQuery {
  std::string query_id;
  int query_length = 0;
  double zipf_weight = 0.0;
  std::vector<WorldDoc> docs;  // base-rank order
};

// Ground-truth world: queries, candidates with features, and the true CTR@1
// functions the click model draws from.
class World {
 public:
  static World generate(const WorldSpec& spec);

  const WorldSpec& spec() const { return spec_; }
  const std::vector<WorldQuery>& queries() const { return queries_; }
  const WorldQuery& query(int index) const { return queries_[static_cast<size_t>(index)]; }
  int query_index(const std::string& query_id) const;  // -1 when unknown

  double true_ctr1(int query_index, int base_rank, int64_t t) const;
  std::vector<Candidate> candidates(int query_index) const;
  int sample_query(Rng& rng) const;

  // exact expected CTR@1 at time t of a policy that top-ranks
  // top_pick(query_index) (a base rank), averaged over the query distribution
  double expected_ctr1(const std::function<int(int)>& top_pick, int64_t t) const;

 private:
  WorldSpec spec_;
  std::vector<WorldQuery> queries_;
  std::vector<double> zipf_cdf_;
};

// Uniformly shuffled top-s sessions (the exploration bucket).
std::vector<SessionRecord> generate_exploration_log(const World& world, uint64_t seed);
// Identity-order sessions (the production control log): same click model,
// position and relevance confounded.
std::vector<SessionRecord> generate_control_log(const World& world, uint64_t seed);

// one JSON line per query with features, base ranks, and CTR segments
void write_ground_truth(const std::string& path, const World& world);

}  // namespace ctrrank
