#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "ctrrank/model.hpp"

namespace ctrrank {

struct TrainingExample {
  PairKey key;
  FeatureVector x;
  int click = 0;     // {0,1}
  int position = 1;  // display position in [1, s]; 1 for position-1-only data
};

// Per-pair sums. a = lambda2 + #examples, b = sum of feature vectors,
// d = lambda2 * prior + sum of clicks.
struct PairStats {
  double a = 0.0;
  Vec b;
  double d = 0.0;
  int64_t count = 0;
};

// Running sums that make the ridge solution exactly recomputable without
// revisiting data: A0, d0 globally and (a_j, b_j, d_j) per distinct pair.
class SufficientStats {
 public:
  SufficientStats() = default;
  // a0_init and d0_init carry the regularizer terms (lambda1*I, lambda1*beta0).
  SufficientStats(Mat a0_init, Vec d0_init, double lambda2, double prior_b0);

  static SufficientStats for_hyper(const HyperParams& hyper);

  // Warm-start prior for one pair; fresh entries for this key start at
  // d = lambda2 * prior instead of lambda2 * b0. Must be set before the
  // first example of that key arrives.
  void set_pair_prior(const PairKey& key, double prior);

  double pair_prior(const PairKey& key) const;

  // Position handling is deliberately absent here: multi-position fits build
  // their own extended statistics (see solve_with_positions).
  void accumulate(const TrainingExample& ex);

  // the entry accumulate would update for this key, including the fresh-pair
  // state (a = lambda2, b = 0, d = lambda2 * prior) for unseen keys
  PairStats pair(const PairKey& key) const;

  int dim() const { return a0_.n(); }
  const Mat& a0() const { return a0_; }
  const Vec& d0() const { return d0_; }
  double lambda2() const { return lambda2_; }
  int64_t n() const { return n_; }
  const std::map<PairKey, PairStats>& pairs() const { return pairs_; }

  nlohmann::json to_json() const;
  // priors must be re-supplied by the owner (they live in the model half of a
  // checkpoint, not here)
  static SufficientStats from_json(const nlohmann::json& j, double lambda2, double prior_b0);

 private:
  Mat a0_;
  Vec d0_;
  double lambda2_ = 0.0;
  double prior_b0_ = 0.0;
  std::map<PairKey, PairStats> pairs_;
  std::map<PairKey, double> pair_priors_;
  int64_t n_ = 0;
};

// Exact minimizer of the regularized square loss over (beta, {b_qu}) via the
// partitioned closed form: O(d^3 + dN) instead of O((d+N)^3).
ModelState solve(const SufficientStats& stats, const HyperParams& hyper);

// Coefficients-only fit: pair biases are dropped from the model, leaving
// ordinary ridge regression on the features. The returned state predicts
// beta . x exactly (its bias fallback is 0).
ModelState solve_no_bias(const SufficientStats& stats, const HyperParams& hyper);

// Joint exact fit of (beta, {b_qu}, {b_p}) from clicks at multiple display
// positions, with b_1 = 0. Internally solved as a (d + s - 1)-dimensional
// system with per-pair elimination. force_zero_pos_bias drops the position
// terms entirely (all b_p = 0) while still consuming every position's clicks.
ModelState solve_with_positions(const std::vector<TrainingExample>& data,
                                const HyperParams& hyper, bool force_zero_pos_bias = false);

}  // namespace ctrrank
