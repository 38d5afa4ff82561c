#include "ctrrank/learner_online.hpp"

#include <cmath>

#include "ctrrank/errors.hpp"

namespace ctrrank {

void sherman_morrison_update(Mat& inv, const Vec& w, double scale) {
  if (scale == 0.0) return;
  const Vec iw = inv.mul(w);
  const double denom = 1.0 + scale * dot(w, iw);
  require(std::isfinite(denom) && denom > 1e-12,
          "sherman_morrison_update: update would lose positive definiteness");
  const double f = scale / denom;
  const int n = inv.n();
  for (int i = 0; i < n; ++i) {
    const double fi = f * iw[static_cast<size_t>(i)];
    if (fi == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      inv(i, j) -= fi * iw[static_cast<size_t>(j)];
    }
  }
}

OnlineLearner::OnlineLearner(const HyperParams& hyper, LearnerOptions opts)
    : OnlineLearner(ModelState::priors(hyper), hyper, opts) {}

OnlineLearner::OnlineLearner(const ModelState& warm, const HyperParams& hyper,
                             LearnerOptions opts)
    : hyper_(hyper), prior_(warm), opts_(opts) {
  hyper_.validate();
  warm.validate();
  require(warm.d() == hyper_.d(), "OnlineLearner: warm model dimension mismatch");
  require(warm.hyper.s == hyper_.s, "OnlineLearner: warm model s mismatch");

  // the warm model becomes the prior: its beta seeds beta0, its pair biases
  // seed the per-pair priors, its fallback seeds b0
  hyper_.beta0 = warm.beta;
  hyper_.b0 = warm.hyper.b0;
  stats_ = SufficientStats::for_hyper(hyper_);
  if (opts_.use_pair_bias) {
    for (const auto& [key, value] : warm.pair_bias) stats_.set_pair_prior(key, value);
  }
  init_reduced();
}

void OnlineLearner::init_reduced() {
  m_ = stats_.a0();
  rhs_ = stats_.d0();
  if (opts_.use_pair_bias) {
    for (const auto& [key, p] : stats_.pairs()) {
      m_.add_outer(p.b, -1.0 / p.a);
      axpy(rhs_, -p.d / p.a, p.b);
    }
  }
  if (opts_.mode == LearnerMode::rank_one) inv_ = spd_inverse(m_);
  since_rebuild_ = 0;
}

void OnlineLearner::observe(const TrainingExample& ex) {
  require(ex.position == 1, "observe: online updates consume position-1 clicks only");
  require(static_cast<int>(ex.x.size()) == hyper_.d(), "observe: feature dimension mismatch");

  const PairStats before = stats_.pair(ex.key);
  stats_.accumulate(ex);
  const PairStats after = stats_.pair(ex.key);
  observed_ += 1;

  if (opts_.freeze_beta) {
    // beta never moves; only this pair's bias is stale now
    dirty_pairs_.insert(ex.key);
    return;
  }

  m_.add_outer(ex.x, 1.0);
  if (ex.click) axpy(rhs_, 1.0, ex.x);
  if (opts_.use_pair_bias) {
    if (before.count > 0) {
      m_.add_outer(before.b, 1.0 / before.a);  // retract the old pair term
      axpy(rhs_, before.d / before.a, before.b);
    }
    m_.add_outer(after.b, -1.0 / after.a);
    axpy(rhs_, -after.d / after.a, after.b);
  }

  if (opts_.mode == LearnerMode::rank_one) {
    since_rebuild_ += 1;
    if (since_rebuild_ >= opts_.rebuild_interval) {
      inv_ = spd_inverse(m_);
      since_rebuild_ = 0;
    } else {
      sherman_morrison_update(inv_, ex.x, 1.0);
      if (opts_.use_pair_bias) {
        if (before.count > 0) sherman_morrison_update(inv_, before.b, 1.0 / before.a);
        sherman_morrison_update(inv_, after.b, -1.0 / after.a);
      }
    }
  }

  version_ += 1;  // every cached bias is now stale (beta moved)
}

void OnlineLearner::refresh_beta() const {
  if (beta_version_ == version_ && !beta_cache_.empty()) return;
  if (opts_.freeze_beta || stats_.n() == 0) {
    // no data (or pinned): the regularizer minimum is the prior itself
    beta_cache_ = hyper_.beta0;
  } else {
    switch (opts_.mode) {
      case LearnerMode::exact_full:
        beta_cache_ = spd_solve(m_, rhs_);
        break;
      case LearnerMode::rank_one:
        beta_cache_ = inv_.mul(rhs_);
        break;
      case LearnerMode::diagonal: {
        // off-diagonals dropped at solve time; inversion is O(d)
        const int d = m_.n();
        beta_cache_.assign(static_cast<size_t>(d), 0.0);
        for (int i = 0; i < d; ++i) {
          beta_cache_[static_cast<size_t>(i)] = rhs_[static_cast<size_t>(i)] / m_(i, i);
        }
        break;
      }
    }
  }
  beta_version_ = version_;
}

const Vec& OnlineLearner::beta() const {
  refresh_beta();
  return beta_cache_;
}

double OnlineLearner::compute_bias(const PairKey& key) const {
  const PairStats p = stats_.pair(key);
  if (p.count == 0) {
    // fresh pair: b = 0, the beta term vanishes, lambda2 cancels exactly
    return stats_.pair_prior(key);
  }
  refresh_beta();
  return (p.d - dot(p.b, beta_cache_)) / p.a;
}

double OnlineLearner::pair_bias(const PairKey& key) const {
  if (!opts_.use_pair_bias) return 0.0;
  const auto it = bias_cache_.find(key);
  const bool dirty = dirty_pairs_.contains(key);
  if (it != bias_cache_.end() && it->second.second == version_ && !dirty) {
    return it->second.first;
  }
  const double value = compute_bias(key);
  bias_cache_[key] = {value, version_};
  if (dirty) dirty_pairs_.erase(key);
  return value;
}

double OnlineLearner::predict_ctr1(const PairKey& key, const FeatureVector& x) const {
  require(static_cast<int>(x.size()) == hyper_.d(), "predict_ctr1: feature dimension mismatch");
  return dot(beta(), x) + pair_bias(key);
}

ModelState OnlineLearner::current_model() const {
  ModelState out;
  out.beta = beta();
  out.hyper = hyper_;
  out.pos_bias = prior_.pos_bias;
  if (opts_.use_pair_bias) {
    out.pair_bias = prior_.pair_bias;  // unobserved warm pairs sit at their prior
    for (const auto& [key, p] : stats_.pairs()) {
      out.pair_bias[key] = (p.d - dot(p.b, out.beta)) / p.a;
    }
  } else {
    out.hyper.b0 = 0.0;
  }
  out.validate();
  return out;
}

namespace {

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.n(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
  const int n = static_cast<int>(j.size());
  Mat m(n);
  for (int i = 0; i < n; ++i) {
    const auto& row = j.at(static_cast<size_t>(i));
    require(static_cast<int>(row.size()) == n, "checkpoint: matrix not square");
    for (int k = 0; k < n; ++k) m(i, k) = row.at(static_cast<size_t>(k)).get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json OnlineLearner::checkpoint() const {
  // the maintained reduced system rides along so that a restored learner
  // follows the exact same float trajectory as the original
  nlohmann::json j{{"prior", prior_.to_json()},
                   {"hyper", hyper_.to_json()},
                   {"b0", hyper_.b0},
                   {"stats", stats_.to_json()},
                   {"observed", observed_},
                   {"reduced_m", mat_to_json(m_)},
                   {"reduced_rhs", rhs_},
                   {"since_rebuild", since_rebuild_}};
  if (opts_.mode == LearnerMode::rank_one) j["inv"] = mat_to_json(inv_);
  return j;
}

OnlineLearner OnlineLearner::restore(const nlohmann::json& j, LearnerOptions opts) {
  HyperParams hyper = HyperParams::from_json(j.at("hyper"));
  hyper.b0 = j.at("b0").get<double>();
  const ModelState prior = ModelState::from_json(j.at("prior"));

  OnlineLearner learner(prior, hyper, opts);
  SufficientStats stats = SufficientStats::from_json(j.at("stats"), hyper.lambda2, hyper.b0);
  require(stats.dim() == hyper.d(), "OnlineLearner::restore: stats dimension mismatch");
  if (opts.use_pair_bias) {
    for (const auto& [key, value] : prior.pair_bias) {
      if (!stats.pairs().contains(key)) stats.set_pair_prior(key, value);
    }
  }
  learner.stats_ = std::move(stats);
  learner.observed_ = j.at("observed").get<int64_t>();
  if (j.contains("reduced_m")) {
    learner.m_ = mat_from_json(j.at("reduced_m"));
    learner.rhs_ = j.at("reduced_rhs").get<Vec>();
    learner.since_rebuild_ = j.value("since_rebuild", int64_t{0});
    require(learner.m_.n() == hyper.d(), "OnlineLearner::restore: reduced system dimension");
    if (opts.mode == LearnerMode::rank_one) {
      learner.inv_ = j.contains("inv") ? mat_from_json(j.at("inv")) : spd_inverse(learner.m_);
    }
  } else {
    learner.init_reduced();  // hand-written checkpoint without derived state
  }
  learner.version_ += 1;
  return learner;
}

}  // namespace ctrrank
