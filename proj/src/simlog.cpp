#include "ctrrank/simlog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctrrank/errors.hpp"

namespace ctrrank {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clip_ctr(double v) { return std::min(0.99, std::max(0.01, v)); }

Vec default_weights(int d) {
  // w[0] pairs with the constant feature and sets the base click logit
  Vec w(static_cast<size_t>(d));
  w[0] = -0.8;
  for (int i = 1; i < d; ++i) {
    const double sign = (i % 2 == 1) ? 1.0 : -1.0;
    w[static_cast<size_t>(i)] = sign * 0.9 / std::sqrt(static_cast<double>(i));
  }
  return w;
}

std::string query_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "q%05d", index);
  return buf;
}

// word-count distribution for synthetic queries
int sample_query_length(Rng& rng) {
  const double u = rng.next_unit();
  if (u < 0.28) return 1;
  if (u < 0.58) return 2;
  if (u < 0.80) return 3;
  if (u < 0.92) return 4;
  if (u < 0.97) return 5;
  return 6;
}

}  // namespace

int64_t WorldSpec::session_count() const {
  return static_cast<int64_t>(std::llround(static_cast<double>(horizon) * sessions_per_second));
}

void WorldSpec::validate() const {
  require(n_queries > 0, "WorldSpec: n_queries must be positive");
  require(zipf_exponent > 0.0, "WorldSpec: zipf_exponent must be positive");
  require(d > 0 && s > 0, "WorldSpec: d and s must be positive");
  require(true_weights.empty() || static_cast<int>(true_weights.size()) == d,
          "WorldSpec: true_weights length must equal d");
  require(pair_noise_sd >= 0.0 && base_rank_noise_sd >= 0.0, "WorldSpec: noise sd negative");
  require(position_gamma >= 0.0, "WorldSpec: position_gamma negative");
  require(horizon > 0 && sessions_per_second > 0.0, "WorldSpec: empty horizon");
  for (const auto& e : drift_events) {
    require(e.doc_base_rank >= 1 && e.doc_base_rank <= s, "WorldSpec: drift doc rank");
    require(e.start_time >= 0, "WorldSpec: drift start time");
    require(e.new_ctr >= 0.0 && e.new_ctr <= 1.0, "WorldSpec: drift ctr must be in [0,1]");
  }
}

nlohmann::json WorldSpec::to_json() const {
  nlohmann::json drifts = nlohmann::json::array();
  for (const auto& e : drift_events) {
    drifts.push_back(nlohmann::json{{"query_id", e.query_id},
                                    {"doc_base_rank", e.doc_base_rank},
                                    {"start_time", e.start_time},
                                    {"new_ctr", e.new_ctr}});
  }
  return nlohmann::json{{"n_queries", n_queries},
                        {"zipf_exponent", zipf_exponent},
                        {"d", d},
                        {"s", s},
                        {"true_weights", true_weights},
                        {"pair_noise_sd", pair_noise_sd},
                        {"position_gamma", position_gamma},
                        {"base_rank_noise_sd", base_rank_noise_sd},
                        {"drift_events", std::move(drifts)},
                        {"horizon", horizon},
                        {"sessions_per_second", sessions_per_second},
                        {"rng_seed", rng_seed}};
}

WorldSpec WorldSpec::from_json(const nlohmann::json& j) {
  WorldSpec spec;
  spec.n_queries = j.value("n_queries", spec.n_queries);
  spec.zipf_exponent = j.value("zipf_exponent", spec.zipf_exponent);
  spec.d = j.value("d", spec.d);
  spec.s = j.value("s", spec.s);
  spec.true_weights = j.value("true_weights", spec.true_weights);
  spec.pair_noise_sd = j.value("pair_noise_sd", spec.pair_noise_sd);
  spec.position_gamma = j.value("position_gamma", spec.position_gamma);
  spec.base_rank_noise_sd = j.value("base_rank_noise_sd", spec.base_rank_noise_sd);
  if (j.contains("drift_events")) {
    for (const auto& ej : j.at("drift_events")) {
      DriftEvent e;
      e.query_id = ej.at("query_id").get<std::string>();
      e.doc_base_rank = ej.at("doc_base_rank").get<int>();
      e.start_time = ej.at("start_time").get<int64_t>();
      e.new_ctr = ej.at("new_ctr").get<double>();
      spec.drift_events.push_back(std::move(e));
    }
  }
  spec.horizon = j.value("horizon", spec.horizon);
  spec.sessions_per_second = j.value("sessions_per_second", spec.sessions_per_second);
  spec.rng_seed = j.value("rng_seed", spec.rng_seed);
  spec.validate();
  return spec;
}

double WorldDoc::true_ctr1(int64_t t) const {
  double value = ctr_segments.front().second;
  for (const auto& [from, v] : ctr_segments) {
    if (from <= t) value = v;
    else break;
  }
  return value;
}

World World::generate(const WorldSpec& spec_in) {
  spec_in.validate();
  World world;
  world.spec_ = spec_in;
  if (world.spec_.true_weights.empty()) world.spec_.true_weights = default_weights(spec_in.d);
  const WorldSpec& spec = world.spec_;

  Rng rng(spec.rng_seed);
  world.queries_.reserve(static_cast<size_t>(spec.n_queries));
  double total_weight = 0.0;
  for (int qi = 0; qi < spec.n_queries; ++qi) {
    total_weight += std::pow(static_cast<double>(qi + 1), -spec.zipf_exponent);
  }

  double cum = 0.0;
  world.zipf_cdf_.reserve(static_cast<size_t>(spec.n_queries));
  for (int qi = 0; qi < spec.n_queries; ++qi) {
    WorldQuery q;
    q.query_id = query_name(qi);
    q.query_length = sample_query_length(rng);
    q.zipf_weight = std::pow(static_cast<double>(qi + 1), -spec.zipf_exponent) / total_weight;
    cum += q.zipf_weight;
    world.zipf_cdf_.push_back(cum);

    // draw docs, then order them by a noisy view of their true CTR so the
    // baseline ranking is informative but improvable
    std::vector<WorldDoc> docs;
    std::vector<double> rank_score;
    for (int di = 0; di < spec.s; ++di) {
      WorldDoc doc;
      doc.doc_id = q.query_id + "/d" + std::to_string(di);
      // constant first feature so linear models can carry the base rate
      doc.x.resize(static_cast<size_t>(spec.d));
      doc.x[0] = 1.0;
      for (int k = 1; k < spec.d; ++k) doc.x[static_cast<size_t>(k)] = rng.next_normal();
      const double noise = spec.pair_noise_sd * rng.next_normal();
      const double ctr = clip_ctr(sigmoid(dot(spec.true_weights, doc.x) + noise));
      doc.ctr_segments.emplace_back(0, ctr);
      rank_score.push_back(ctr + spec.base_rank_noise_sd * rng.next_normal());
      docs.push_back(std::move(doc));
    }
    std::vector<int> order(static_cast<size_t>(spec.s));
    for (int i = 0; i < spec.s; ++i) order[static_cast<size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (rank_score[static_cast<size_t>(a)] != rank_score[static_cast<size_t>(b)])
        return rank_score[static_cast<size_t>(a)] > rank_score[static_cast<size_t>(b)];
      return a < b;
    });
    q.docs.resize(static_cast<size_t>(spec.s));
    for (int r = 0; r < spec.s; ++r) {
      WorldDoc doc = std::move(docs[static_cast<size_t>(order[static_cast<size_t>(r)])]);
      doc.base_rank = r + 1;
      q.docs[static_cast<size_t>(r)] = std::move(doc);
    }
    world.queries_.push_back(std::move(q));
  }

  for (const auto& e : spec.drift_events) {
    const int qi = world.query_index(e.query_id);
    require(qi >= 0, "WorldSpec: drift event names unknown query " + e.query_id);
    auto& doc = world.queries_[static_cast<size_t>(qi)].docs[static_cast<size_t>(e.doc_base_rank - 1)];
    // drift values override verbatim (clipping applies to the sigmoid model)
    doc.ctr_segments.emplace_back(e.start_time, e.new_ctr);
    std::sort(doc.ctr_segments.begin(), doc.ctr_segments.end());
  }
  return world;
}

int World::query_index(const std::string& query_id) const {
  // ids are dense "qNNNNN"; parse rather than scan
  if (query_id.size() < 2 || query_id[0] != 'q') return -1;
  int index = 0;
  for (size_t i = 1; i < query_id.size(); ++i) {
    if (query_id[i] < '0' || query_id[i] > '9') return -1;
    index = index * 10 + (query_id[i] - '0');
  }
  if (index < 0 || index >= static_cast<int>(queries_.size())) return -1;
  return queries_[static_cast<size_t>(index)].query_id == query_id ? index : -1;
}

double World::true_ctr1(int query_index, int base_rank, int64_t t) const {
  const auto& q = queries_[static_cast<size_t>(query_index)];
  require(base_rank >= 1 && base_rank <= static_cast<int>(q.docs.size()),
          "true_ctr1: base rank out of range");
  return q.docs[static_cast<size_t>(base_rank - 1)].true_ctr1(t);
}

std::vector<Candidate> World::candidates(int query_index) const {
  const auto& q = queries_[static_cast<size_t>(query_index)];
  std::vector<Candidate> out;
  out.reserve(q.docs.size());
  for (const auto& doc : q.docs) {
    out.push_back(Candidate{PairKey{q.query_id, doc.doc_id}, doc.x, doc.base_rank});
  }
  return out;
}

int World::sample_query(Rng& rng) const {
  const double u = rng.next_unit();
  const auto it = std::upper_bound(zipf_cdf_.begin(), zipf_cdf_.end(), u);
  const size_t idx = static_cast<size_t>(it - zipf_cdf_.begin());
  return static_cast<int>(std::min(idx, zipf_cdf_.size() - 1));
}

double World::expected_ctr1(const std::function<int(int)>& top_pick, int64_t t) const {
  double acc = 0.0;
  for (size_t qi = 0; qi < queries_.size(); ++qi) {
    const int pick = top_pick(static_cast<int>(qi));
    acc += queries_[qi].zipf_weight * true_ctr1(static_cast<int>(qi), pick, t);
  }
  return acc;
}

namespace {

std::vector<SessionRecord> generate_log(const World& world, uint64_t seed, bool shuffled) {
  const WorldSpec& spec = world.spec();
  const int64_t count = spec.session_count();
  const int s = spec.s;
  Rng rng(seed);

  std::vector<int> identity(static_cast<size_t>(s));
  for (int i = 0; i < s; ++i) identity[static_cast<size_t>(i)] = i + 1;

  std::vector<SessionRecord> log;
  log.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    SessionRecord rec;
    rec.ts = static_cast<int64_t>(static_cast<double>(i) / spec.sessions_per_second);
    const int qi = world.sample_query(rng);
    const auto& q = world.query(qi);
    rec.query_id = q.query_id;
    rec.query_length = q.query_length;
    rec.candidates = world.candidates(qi);
    rec.shown_perm = shuffled ? rng.permutation(s) : identity;
    rec.clicks.resize(static_cast<size_t>(s));
    for (int p = 1; p <= s; ++p) {
      const int rank = rec.shown_perm[static_cast<size_t>(p - 1)];
      const double prob = world.true_ctr1(qi, rank, rec.ts) *
                          std::pow(static_cast<double>(p), -spec.position_gamma);
      rec.clicks[static_cast<size_t>(p - 1)] = rng.next_bernoulli(prob) ? 1 : 0;
    }
    log.push_back(std::move(rec));
  }
  return log;
}

}  // namespace

std::vector<SessionRecord> generate_exploration_log(const World& world, uint64_t seed) {
  return generate_log(world, seed, true);
}

std::vector<SessionRecord> generate_control_log(const World& world, uint64_t seed) {
  return generate_log(world, seed, false);
}

void write_ground_truth(const std::string& path, const World& world) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ground truth file: " + path);
  for (const auto& q : world.queries()) {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& doc : q.docs) {
      nlohmann::json segs = nlohmann::json::array();
      for (const auto& [from, value] : doc.ctr_segments) {
        segs.push_back(nlohmann::json{{"from", from}, {"value", value}});
      }
      docs.push_back(nlohmann::json{{"did", doc.doc_id},
                                    {"base_rank", doc.base_rank},
                                    {"x", doc.x},
                                    {"true_ctr1", std::move(segs)}});
    }
    out << nlohmann::json{{"qid", q.query_id},
                          {"qlen", q.query_length},
                          {"zipf_weight", q.zipf_weight},
                          {"docs", std::move(docs)}}
               .dump()
        << '\n';
  }
  if (!out) throw IoError("failed writing ground truth file: " + path);
}

}  // namespace ctrrank
