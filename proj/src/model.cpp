#include "ctrrank/model.hpp"

#include <cmath>
#include <fstream>

#include "ctrrank/errors.hpp"

namespace ctrrank {

std::string PairKey::joined() const {
  std::string out;
  out.reserve(query_id.size() + 1 + doc_id.size());
  out.append(query_id);
  out.push_back('\0');
  out.append(doc_id);
  return out;
}

PairKey PairKey::split(const std::string& joined) {
  const size_t pos = joined.find('\0');
  require(pos != std::string::npos, "PairKey: missing NUL separator");
  PairKey key{joined.substr(0, pos), joined.substr(pos + 1)};
  require(!key.query_id.empty() && !key.doc_id.empty(), "PairKey: empty id");
  return key;
}

HyperParams HyperParams::make(int d, int s, double l1, double l2, double l3) {
  HyperParams h;
  h.lambda1 = l1;
  h.lambda2 = l2;
  h.lambda3 = l3;
  h.beta0.assign(static_cast<size_t>(d), 0.0);
  h.b0 = 0.0;
  h.bp0.assign(static_cast<size_t>(s), 0.0);
  h.s = s;
  h.validate();
  return h;
}

void HyperParams::validate() const {
  require(lambda1 > 0.0 && lambda2 > 0.0 && lambda3 > 0.0,
          "HyperParams: regularizers must be positive");
  require(d() > 0, "HyperParams: dimension must be positive");
  require(s > 0, "HyperParams: s must be positive");
  require(static_cast<int>(bp0.size()) == s, "HyperParams: bp0 length must equal s");
  require(bp0[0] == 0.0, "HyperParams: position-1 prior must be 0");
  require(all_finite(beta0) && all_finite(bp0) && std::isfinite(b0),
          "HyperParams: priors must be finite");
}

nlohmann::json HyperParams::to_json() const {
  return nlohmann::json{{"lambda1", lambda1}, {"lambda2", lambda2}, {"lambda3", lambda3},
                        {"beta0", beta0},     {"b0", b0},           {"bp0", bp0},
                        {"s", s}};
}

HyperParams HyperParams::from_json(const nlohmann::json& j) {
  HyperParams h;
  h.lambda1 = j.at("lambda1").get<double>();
  h.lambda2 = j.at("lambda2").get<double>();
  h.lambda3 = j.at("lambda3").get<double>();
  h.beta0 = j.at("beta0").get<Vec>();
  h.b0 = j.at("b0").get<double>();
  h.bp0 = j.at("bp0").get<Vec>();
  h.s = j.at("s").get<int>();
  h.validate();
  return h;
}

double ModelState::bias_for(const PairKey& key) const {
  const auto it = pair_bias.find(key);
  return it == pair_bias.end() ? hyper.b0 : it->second;
}

ModelState ModelState::priors(const HyperParams& hyper) {
  hyper.validate();
  ModelState m;
  m.beta = hyper.beta0;
  m.pos_bias = hyper.bp0;
  m.hyper = hyper;
  return m;
}

void ModelState::validate() const {
  hyper.validate();
  require(d() == hyper.d(), "ModelState: beta length disagrees with hyper");
  require(all_finite(beta), "ModelState: beta must be finite");
  require(static_cast<int>(pos_bias.size()) == hyper.s, "ModelState: pos_bias length");
  require(pos_bias[0] == 0.0, "ModelState: position-1 bias must be 0");
  require(all_finite(pos_bias), "ModelState: pos_bias must be finite");
  for (const auto& [key, value] : pair_bias) {
    require(!key.query_id.empty() && !key.doc_id.empty(), "ModelState: empty pair id");
    require(std::isfinite(value), "ModelState: pair bias must be finite");
  }
}

nlohmann::json ModelState::to_json() const {
  nlohmann::json pairs = nlohmann::json::object();
  for (const auto& [key, value] : pair_bias) pairs[key.joined()] = value;
  return nlohmann::json{{"d", d()},
                        {"beta", beta},
                        {"b0", hyper.b0},
                        {"pair_bias", std::move(pairs)},
                        {"pos_bias", pos_bias},
                        {"hyper", hyper.to_json()}};
}

ModelState ModelState::from_json(const nlohmann::json& j) {
  ModelState m;
  m.hyper = HyperParams::from_json(j.at("hyper"));
  m.hyper.b0 = j.at("b0").get<double>();
  m.beta = j.at("beta").get<Vec>();
  m.pos_bias = j.at("pos_bias").get<Vec>();
  for (const auto& [joined, value] : j.at("pair_bias").items()) {
    m.pair_bias[PairKey::split(joined)] = value.get<double>();
  }
  require(j.at("d").get<int>() == m.d(), "ModelState: d disagrees with beta length");
  m.validate();
  return m;
}

void ModelState::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file: " + path);
  out << to_json().dump() << '\n';
  if (!out) throw IoError("failed writing model file: " + path);
}

ModelState ModelState::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

double predict_ctr1(const ModelState& state, const PairKey& key, const FeatureVector& x) {
  require(static_cast<int>(x.size()) == state.d(), "predict_ctr1: feature dimension mismatch");
  return dot(state.beta, x) + state.bias_for(key);
}

double predict_ctr_at_p(const ModelState& state, const PairKey& key, const FeatureVector& x,
                        int p) {
  require(p >= 1 && p <= state.hyper.s, "predict_ctr_at_p: position out of range");
  return predict_ctr1(state, key, x) + state.pos_bias[static_cast<size_t>(p - 1)];
}

}  // namespace ctrrank
