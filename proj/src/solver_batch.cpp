#include "ctrrank/solver_batch.hpp"

#include <cmath>

#include "ctrrank/errors.hpp"

namespace ctrrank {

SufficientStats::SufficientStats(Mat a0_init, Vec d0_init, double lambda2, double prior_b0)
    : a0_(std::move(a0_init)), d0_(std::move(d0_init)), lambda2_(lambda2), prior_b0_(prior_b0) {
  require(a0_.n() == static_cast<int>(d0_.size()), "SufficientStats: A0/d0 size mismatch");
  require(lambda2_ > 0.0, "SufficientStats: lambda2 must be positive");
}

SufficientStats SufficientStats::for_hyper(const HyperParams& hyper) {
  hyper.validate();
  Mat a0(hyper.d(), hyper.lambda1);
  Vec d0 = hyper.beta0;
  for (double& v : d0) v *= hyper.lambda1;
  return SufficientStats(std::move(a0), std::move(d0), hyper.lambda2, hyper.b0);
}

void SufficientStats::set_pair_prior(const PairKey& key, double prior) {
  require(!pairs_.contains(key), "set_pair_prior: pair already has data");
  pair_priors_[key] = prior;
}

double SufficientStats::pair_prior(const PairKey& key) const {
  const auto it = pair_priors_.find(key);
  return it == pair_priors_.end() ? prior_b0_ : it->second;
}

void SufficientStats::accumulate(const TrainingExample& ex) {
  require(static_cast<int>(ex.x.size()) == dim(), "accumulate: feature dimension mismatch");
  require(ex.click == 0 || ex.click == 1, "accumulate: click label must be 0 or 1");
  require(all_finite(ex.x), "accumulate: non-finite feature value");
  require(!ex.key.query_id.empty() && !ex.key.doc_id.empty(), "accumulate: empty pair id");

  a0_.add_outer(ex.x, 1.0);
  if (ex.click) axpy(d0_, 1.0, ex.x);

  auto it = pairs_.find(ex.key);
  if (it == pairs_.end()) {
    PairStats fresh;
    fresh.a = lambda2_;
    fresh.b.assign(static_cast<size_t>(dim()), 0.0);
    fresh.d = lambda2_ * pair_prior(ex.key);
    it = pairs_.emplace(ex.key, std::move(fresh)).first;
  }
  PairStats& p = it->second;
  p.a += 1.0;
  axpy(p.b, 1.0, ex.x);
  p.d += ex.click;
  p.count += 1;
  n_ += 1;
}

PairStats SufficientStats::pair(const PairKey& key) const {
  const auto it = pairs_.find(key);
  if (it != pairs_.end()) return it->second;
  PairStats fresh;
  fresh.a = lambda2_;
  fresh.b.assign(static_cast<size_t>(dim()), 0.0);
  fresh.d = lambda2_ * pair_prior(key);
  return fresh;
}

nlohmann::json SufficientStats::to_json() const {
  nlohmann::json a0 = nlohmann::json::array();
  for (int i = 0; i < a0_.n(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < a0_.n(); ++j) row.push_back(a0_(i, j));
    a0.push_back(std::move(row));
  }
  nlohmann::json pairs = nlohmann::json::object();
  for (const auto& [key, p] : pairs_) {
    pairs[key.joined()] = nlohmann::json{{"a", p.a}, {"b", p.b}, {"d", p.d}, {"count", p.count}};
  }
  return nlohmann::json{
      {"A0", std::move(a0)}, {"d0", d0_}, {"pairs", std::move(pairs)}, {"n", n_}};
}

SufficientStats SufficientStats::from_json(const nlohmann::json& j, double lambda2,
                                           double prior_b0) {
  const auto& a0j = j.at("A0");
  const int d = static_cast<int>(a0j.size());
  Mat a0(d);
  for (int i = 0; i < d; ++i) {
    const auto& row = a0j.at(static_cast<size_t>(i));
    require(static_cast<int>(row.size()) == d, "SufficientStats: A0 not square");
    for (int k = 0; k < d; ++k) a0(i, k) = row.at(static_cast<size_t>(k)).get<double>();
  }
  SufficientStats stats(std::move(a0), j.at("d0").get<Vec>(), lambda2, prior_b0);
  for (const auto& [joined, pj] : j.at("pairs").items()) {
    PairStats p;
    p.a = pj.at("a").get<double>();
    p.b = pj.at("b").get<Vec>();
    p.d = pj.at("d").get<double>();
    p.count = pj.at("count").get<int64_t>();
    require(static_cast<int>(p.b.size()) == d, "SufficientStats: pair vector length");
    stats.pairs_.emplace(PairKey::split(joined), std::move(p));
  }
  stats.n_ = j.at("n").get<int64_t>();
  return stats;
}

namespace {

// reduced system: M = A0 - sum a^-1 b b^T, rhs = d0 - sum (d/a) b
void reduce(const SufficientStats& stats, Mat& m, Vec& rhs) {
  m = stats.a0();
  rhs = stats.d0();
  for (const auto& [key, p] : stats.pairs()) {
    m.add_outer(p.b, -1.0 / p.a);
    axpy(rhs, -p.d / p.a, p.b);
  }
}

}  // namespace

ModelState solve(const SufficientStats& stats, const HyperParams& hyper) {
  hyper.validate();
  require(stats.dim() == hyper.d(), "solve: stats dimension disagrees with hyper");
  require(stats.lambda2() == hyper.lambda2, "solve: lambda2 disagrees with hyper");

  Mat m;
  Vec rhs;
  reduce(stats, m, rhs);

  ModelState out;
  out.beta = spd_solve(m, rhs);
  for (const auto& [key, p] : stats.pairs()) {
    out.pair_bias[key] = (p.d - dot(p.b, out.beta)) / p.a;
  }
  out.pos_bias = hyper.bp0;
  out.hyper = hyper;
  out.validate();
  return out;
}

ModelState solve_no_bias(const SufficientStats& stats, const HyperParams& hyper) {
  hyper.validate();
  require(stats.dim() == hyper.d(), "solve_no_bias: stats dimension disagrees with hyper");

  ModelState out;
  out.beta = spd_solve(stats.a0(), stats.d0());
  out.pos_bias = hyper.bp0;
  out.hyper = hyper;
  out.hyper.b0 = 0.0;  // the model carries no bias terms at all
  out.validate();
  return out;
}

ModelState solve_with_positions(const std::vector<TrainingExample>& data,
                                const HyperParams& hyper, bool force_zero_pos_bias) {
  hyper.validate();
  const int d = hyper.d();
  const int s = hyper.s;
  for (const auto& ex : data) {
    require(ex.position >= 1 && ex.position <= s, "solve_with_positions: position out of range");
  }

  if (force_zero_pos_bias) {
    // all b_p pinned at zero: the loss collapses to the position-free form
    // over every example, positions indistinguishable
    SufficientStats stats = SufficientStats::for_hyper(hyper);
    for (const auto& ex : data) stats.accumulate(ex);
    ModelState out = solve(stats, hyper);
    out.pos_bias.assign(static_cast<size_t>(s), 0.0);
    return out;
  }

  // Augment features with position indicators for p >= 2; the position biases
  // become s-1 extra coefficients with their own regularizer block.
  const int ad = d + s - 1;
  Mat a0(ad);
  Vec d0(static_cast<size_t>(ad), 0.0);
  for (int i = 0; i < d; ++i) {
    a0(i, i) = hyper.lambda1;
    d0[static_cast<size_t>(i)] = hyper.lambda1 * hyper.beta0[static_cast<size_t>(i)];
  }
  for (int p = 2; p <= s; ++p) {
    const int i = d + p - 2;
    a0(i, i) = hyper.lambda3;
    d0[static_cast<size_t>(i)] = hyper.lambda3 * hyper.bp0[static_cast<size_t>(p - 1)];
  }

  SufficientStats stats(std::move(a0), std::move(d0), hyper.lambda2, hyper.b0);
  Vec xa(static_cast<size_t>(ad), 0.0);
  for (const auto& ex : data) {
    require(static_cast<int>(ex.x.size()) == d, "solve_with_positions: feature dimension");
    std::copy(ex.x.begin(), ex.x.end(), xa.begin());
    std::fill(xa.begin() + d, xa.end(), 0.0);
    if (ex.position >= 2) xa[static_cast<size_t>(d + ex.position - 2)] = 1.0;
    stats.accumulate(TrainingExample{ex.key, xa, ex.click, 1});
  }

  Mat m;
  Vec rhs;
  reduce(stats, m, rhs);
  const Vec full = spd_solve(m, rhs);

  ModelState out;
  out.beta.assign(full.begin(), full.begin() + d);
  out.pos_bias.assign(static_cast<size_t>(s), 0.0);
  for (int p = 2; p <= s; ++p) {
    out.pos_bias[static_cast<size_t>(p - 1)] = full[static_cast<size_t>(d + p - 2)];
  }
  for (const auto& [key, p] : stats.pairs()) {
    out.pair_bias[key] = (p.d - dot(p.b, full)) / p.a;
  }
  out.hyper = hyper;
  out.validate();
  return out;
}

}  // namespace ctrrank
