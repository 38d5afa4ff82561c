#pragma once

#include <cstdint>
#include <map>
#include <set>

#include <json.hpp>

#include "ctrrank/solver_batch.hpp"

namespace ctrrank {

enum class LearnerMode { exact_full, rank_one, diagonal };

struct LearnerOptions {
  LearnerMode mode = LearnerMode::exact_full;
  // keep beta pinned at its prior; only pair biases move
  bool freeze_beta = false;
  // false drops pair biases from the model entirely (plain online ridge)
  bool use_pair_bias = true;
  // rank_one: rebuild the cached inverse from scratch this often to bound drift
  int64_t rebuild_interval = 10000;
};

// Exact incremental ridge learner. Each observed example updates the
// sufficient statistics and the reduced system in O(d^2); the solution is
// refreshed lazily on read. In rank_one mode a cached inverse is maintained
// with up to three Sherman-Morrison corrections per example; diagonal mode
// inverts only the diagonal of the reduced matrix.
class OnlineLearner {
 public:
  // cold start: priors come from hyper
  explicit OnlineLearner(const HyperParams& hyper, LearnerOptions opts = {});
  // warm start: beta0 <- warm.beta, per-pair priors <- warm.pair_bias
  OnlineLearner(const ModelState& warm, const HyperParams& hyper, LearnerOptions opts = {});

  // position-1 clicks only; ex.position must be 1
  void observe(const TrainingExample& ex);

  // exact solution at the current statistics; deferred biases are refreshed
  // so the result is indistinguishable from eager maintenance
  ModelState current_model() const;

  const Vec& beta() const;
  double pair_bias(const PairKey& key) const;
  double predict_ctr1(const PairKey& key, const FeatureVector& x) const;

  const SufficientStats& stats() const { return stats_; }
  const Mat& inv_cache() const { return inv_; }
  const Mat& reduced_matrix() const { return m_; }
  const HyperParams& hyper() const { return hyper_; }
  LearnerMode mode() const { return opts_.mode; }
  bool frozen() const { return opts_.freeze_beta; }
  int64_t observed() const { return observed_; }
  const std::set<PairKey>& dirty_pairs() const { return dirty_pairs_; }

  nlohmann::json checkpoint() const;
  static OnlineLearner restore(const nlohmann::json& j, LearnerOptions opts = {});

 private:
  void init_reduced();
  void refresh_beta() const;
  double compute_bias(const PairKey& key) const;

  HyperParams hyper_;  // beta0/b0 reflect the effective (possibly warm) priors
  ModelState prior_;   // warm model, or the plain prior state for cold starts
  LearnerOptions opts_;
  SufficientStats stats_;
  Mat m_;    // A0 - sum a^-1 b b^T (identity-reduced to A0 when biases are off)
  Vec rhs_;  // d0 - sum (d/a) b
  Mat inv_;  // rank_one inverse cache
  int64_t observed_ = 0;
  int64_t since_rebuild_ = 0;

  // lazy refresh bookkeeping
  uint64_t version_ = 1;
  mutable std::set<PairKey> dirty_pairs_;
  mutable Vec beta_cache_;
  mutable uint64_t beta_version_ = 0;
  mutable std::map<PairKey, std::pair<double, uint64_t>> bias_cache_;
};

// (M + scale * w w^T)^-1 applied to a maintained inverse, in place
void sherman_morrison_update(Mat& inv, const Vec& w, double scale);

}  // namespace ctrrank
