#include "ctrrank/policy.hpp"

#include <algorithm>
#include <numeric>

#include "ctrrank/errors.hpp"

namespace ctrrank {

void CountingState::record(const PairKey& key, int click) {
  require(click == 0 || click == 1, "CountingState: click must be 0 or 1");
  views[key] += 1;
  global_views += 1;
  if (click) {
    clicks[key] += 1;
    global_clicks += 1;
  }
}

double counting_score(const CountingState& cs, const PairKey& key) {
  constexpr double kappa = 1.0;
  const double mean_ctr =
      cs.global_views > 0 ? static_cast<double>(cs.global_clicks) / cs.global_views : 0.0;
  const auto vit = cs.views.find(key);
  const double v = vit == cs.views.end() ? 0.0 : static_cast<double>(vit->second);
  const auto cit = cs.clicks.find(key);
  const double c = cit == cs.clicks.end() ? 0.0 : static_cast<double>(cit->second);
  return (c + kappa * mean_ctr) / (v + kappa);
}

Policy::Policy(PolicyKind kind, double epsilon, uint64_t seed)
    : kind_(kind), epsilon_(epsilon), rng_(seed) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "Policy: epsilon must be in [0,1]");
}

Policy Policy::baseline(double epsilon, uint64_t seed) {
  return Policy(PolicyKind::baseline_frmsc, epsilon, seed);
}

Policy Policy::batch_model(ModelState model, double epsilon, uint64_t seed) {
  model.validate();
  Policy p(PolicyKind::batch, epsilon, seed);
  p.model_ = std::move(model);
  return p;
}

Policy Policy::online_learner(OnlineLearner learner, double epsilon, uint64_t seed) {
  Policy p(PolicyKind::online, epsilon, seed);
  p.learner_ = std::move(learner);
  return p;
}

Policy Policy::counting(double epsilon, uint64_t seed) {
  return Policy(PolicyKind::counting, epsilon, seed);
}

double Policy::score(const Candidate& c) const {
  switch (kind_) {
    case PolicyKind::baseline_frmsc:
      return -static_cast<double>(c.base_rank);
    case PolicyKind::batch:
      return predict_ctr1(*model_, c.key, c.x);
    case PolicyKind::online:
      return learner_->predict_ctr1(c.key, c.x);
    case PolicyKind::counting:
      return counting_score(counts_, c.key);
  }
  return 0.0;
}

namespace {

void check_candidates(const std::vector<Candidate>& candidates) {
  const int s = static_cast<int>(candidates.size());
  require(s > 0, "rank: no candidates");
  std::vector<bool> seen(static_cast<size_t>(s), false);
  for (const auto& c : candidates) {
    require(c.base_rank >= 1 && c.base_rank <= s, "rank: base_rank out of range");
    require(!seen[static_cast<size_t>(c.base_rank - 1)], "rank: duplicate base_rank");
    seen[static_cast<size_t>(c.base_rank - 1)] = true;
  }
}

}  // namespace

std::vector<int> Policy::greedy_order(const std::vector<Candidate>& candidates) const {
  check_candidates(candidates);
  const int s = static_cast<int>(candidates.size());
  std::vector<int> idx(static_cast<size_t>(s));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> scores(static_cast<size_t>(s));
  for (int i = 0; i < s; ++i) scores[static_cast<size_t>(i)] = score(candidates[static_cast<size_t>(i)]);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double sa = scores[static_cast<size_t>(a)];
    const double sb = scores[static_cast<size_t>(b)];
    if (sa != sb) return sa > sb;
    return candidates[static_cast<size_t>(a)].base_rank < candidates[static_cast<size_t>(b)].base_rank;
  });
  std::vector<int> perm(static_cast<size_t>(s));
  for (int i = 0; i < s; ++i) perm[static_cast<size_t>(i)] = candidates[static_cast<size_t>(idx[static_cast<size_t>(i)])].base_rank;
  return perm;
}

std::vector<int> Policy::rank(const std::vector<Candidate>& candidates) {
  check_candidates(candidates);
  rank_calls_ += 1;
  if (epsilon_ > 0.0 && rng_.next_unit() < epsilon_) {
    explore_draws_ += 1;
    return rng_.permutation(static_cast<int>(candidates.size()));
  }
  return greedy_order(candidates);
}

void Policy::feedback(const std::vector<Candidate>& candidates,
                      const std::vector<int>& shown_perm, const std::vector<int>& clicks) {
  check_candidates(candidates);
  const size_t s = candidates.size();
  require(shown_perm.size() == s && clicks.size() == s,
          "feedback: permutation/click vector misaligned with candidates");
  for (int c : clicks) require(c == 0 || c == 1, "feedback: click must be 0 or 1");

  if (kind_ == PolicyKind::baseline_frmsc || kind_ == PolicyKind::batch) return;

  const int top_rank = shown_perm[0];
  require(top_rank >= 1 && top_rank <= static_cast<int>(s), "feedback: bad permutation");
  const Candidate* top = nullptr;
  for (const auto& c : candidates) {
    if (c.base_rank == top_rank) top = &c;
  }
  require(top != nullptr, "feedback: permutation names a missing candidate");
  const int c1 = clicks[0];

  if (kind_ == PolicyKind::online) {
    learner_->observe(TrainingExample{top->key, top->x, c1, 1});
  } else {
    counts_.record(top->key, c1);
  }
}

const std::vector<PolicyVariantSpec>& policy_registry() {
  static const std::vector<PolicyVariantSpec> registry = {
      {"frmsc", PolicyKind::baseline_frmsc, false, false, false, TrainSource::none},
      {"batch(b)", PolicyKind::batch, true, false, false, TrainSource::exploration_at1},
      {"batch(nb)", PolicyKind::batch, false, false, false, TrainSource::exploration_at1},
      {"online(b)", PolicyKind::online, true, false, false, TrainSource::none},
      {"online(nb)", PolicyKind::online, false, false, false, TrainSource::none},
      {"online(b,ws)", PolicyKind::online, true, true, false, TrainSource::exploration_at1},
      {"online(nb,ws)", PolicyKind::online, false, true, false, TrainSource::exploration_at1},
      {"online(b,ws,w0)", PolicyKind::online, true, true, true, TrainSource::exploration_at1},
      {"counting", PolicyKind::counting, false, false, false, TrainSource::none},
      {"batch(control@1)", PolicyKind::batch, true, false, false, TrainSource::control_at1},
      {"batch(control@4,np)", PolicyKind::batch, true, false, false, TrainSource::control_at4_np},
      {"batch(control@4)", PolicyKind::batch, true, false, false, TrainSource::control_at4},
  };
  return registry;
}

const PolicyVariantSpec* find_policy_variant(const std::string& name) {
  for (const auto& spec : policy_registry()) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

}  // namespace ctrrank
