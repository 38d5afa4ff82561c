#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctrrank/learner_online.hpp"
#include "ctrrank/rng.hpp"

namespace ctrrank {

// One of the s re-ranking candidates of a session, in the engine's order.
struct Candidate {
  PairKey key;
  FeatureVector x;
  int base_rank = 0;  // 1 = highest baseline score
};

// Per-pair click/view counters; the featureless baseline.
struct CountingState {
  std::map<PairKey, int64_t> views;
  std::map<PairKey, int64_t> clicks;
  int64_t global_views = 0;
  int64_t global_clicks = 0;

  // a view is a position-1 display
  void record(const PairKey& key, int click);
};

// Smoothed clicks/views ratio: one pseudo-view at the global mean CTR, so
// unseen pairs fall back to the mean instead of 0/0.
double counting_score(const CountingState& cs, const PairKey& key);

enum class PolicyKind { baseline_frmsc, batch, online, counting };

// A re-ranking policy: scores s candidates and emits a display permutation,
// exploring a uniformly random order with probability epsilon.
class Policy {
 public:
  static Policy baseline(double epsilon, uint64_t seed);
  static Policy batch_model(ModelState model, double epsilon, uint64_t seed);
  static Policy online_learner(OnlineLearner learner, double epsilon, uint64_t seed);
  static Policy counting(double epsilon, uint64_t seed);

  // perm[i] = base_rank of the candidate displayed at position i+1
  std::vector<int> rank(const std::vector<Candidate>& candidates);

  // learning signal from a displayed session: online policies observe the
  // position-1 example, counting policies bump its counters, batch and
  // baseline policies ignore it
  void feedback(const std::vector<Candidate>& candidates, const std::vector<int>& shown_perm,
                const std::vector<int>& clicks);

  double score(const Candidate& c) const;
  // the epsilon=0 ordering; consumes no randomness and mutates nothing
  std::vector<int> greedy_order(const std::vector<Candidate>& candidates) const;

  PolicyKind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }
  const ModelState* model() const { return model_ ? &*model_ : nullptr; }
  const OnlineLearner* learner() const { return learner_ ? &*learner_ : nullptr; }
  OnlineLearner* learner() { return learner_ ? &*learner_ : nullptr; }
  const CountingState& counts() const { return counts_; }

  int64_t rank_calls() const { return rank_calls_; }
  int64_t explore_draws() const { return explore_draws_; }

 private:
  Policy(PolicyKind kind, double epsilon, uint64_t seed);

  PolicyKind kind_;
  std::optional<ModelState> model_;
  std::optional<OnlineLearner> learner_;
  CountingState counts_;
  double epsilon_;
  Rng rng_;
  int64_t rank_calls_ = 0;
  int64_t explore_draws_ = 0;
};

// Where a variant's model parameters come from.
enum class TrainSource { none, exploration_at1, control_at1, control_at4, control_at4_np };

struct PolicyVariantSpec {
  std::string name;
  PolicyKind kind;
  bool use_bias;      // pair bias terms in the model/learner
  bool warm_start;    // online variants seeded from a batch model
  bool freeze_beta;   // online(b,ws,w0)
  TrainSource source; // batch: own training data; online ws: the warm model's
};

// The twelve named variants, in reporting order.
const std::vector<PolicyVariantSpec>& policy_registry();
const PolicyVariantSpec* find_policy_variant(const std::string& name);

}  // namespace ctrrank
