#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrrank/linalg.hpp"

namespace ctrrank {

// Dense standardized feature vector of a (query, document) pair.
using FeatureVector = std::vector<double>;

// Opaque (query, document) identifier. Equality is exact string equality;
// keys are never normalized.
struct PairKey {
  std::string query_id;
  std::string doc_id;

  bool operator==(const PairKey& other) const = default;
  auto operator<=>(const PairKey& other) const = default;

  // wire form: query_id and doc_id joined by a NUL byte
  std::string joined() const;
  static PairKey split(const std::string& joined);
};

struct PairKeyHash {
  size_t operator()(const PairKey& k) const {
    const size_t h1 = std::hash<std::string>{}(k.query_id);
    const size_t h2 = std::hash<std::string>{}(k.doc_id);
    return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
  }
};

struct HyperParams {
  double lambda1 = 10.0;  // shrinks beta toward beta0
  double lambda2 = 10.0;  // shrinks pair biases toward b0
  double lambda3 = 10.0;  // shrinks position biases toward bp0
  Vec beta0;              // prior coefficients, length d
  double b0 = 0.0;        // shared scalar prior for pair biases
  Vec bp0;                // prior position biases, length s, bp0[0] == 0
  int s = 4;              // number of re-ranked top documents

  int d() const { return static_cast<int>(beta0.size()); }

  static HyperParams make(int d, int s = 4, double l1 = 10.0, double l2 = 10.0,
                          double l3 = 10.0);
  void validate() const;

  nlohmann::json to_json() const;
  static HyperParams from_json(const nlohmann::json& j);
};

// Learned model: shared coefficients, per-pair bias corrections, position
// biases. Immutable value once published; safe for any number of readers.
struct ModelState {
  Vec beta;
  std::map<PairKey, double> pair_bias;  // absent key falls back to hyper.b0
  Vec pos_bias;                         // length s, pos_bias[0] == 0
  HyperParams hyper;

  int d() const { return static_cast<int>(beta.size()); }

  double bias_for(const PairKey& key) const;

  // the model that minimizes the regularizers alone (no data)
  static ModelState priors(const HyperParams& hyper);

  void validate() const;

  nlohmann::json to_json() const;
  static ModelState from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ModelState load(const std::string& path);
};

// Predicted CTR@1 score: beta . x + pair bias. Unclamped; only the ordering
// matters for re-ranking.
double predict_ctr1(const ModelState& state, const PairKey& key, const FeatureVector& x);

// CTR@p = CTR@1 + b_p, with b_1 = 0 by convention. p is 1-based in [1, s].
double predict_ctr_at_p(const ModelState& state, const PairKey& key, const FeatureVector& x,
                        int p);

}  // namespace ctrrank
