#include <bit>
#include <cmath>

#include <doctest.h>

#include "ctrrank/errors.hpp"
#include "ctrrank/model.hpp"
#include "ctrrank/rng.hpp"

using namespace ctrrank;

namespace {

ModelState zero_model(int d, int s = 4) {
  return ModelState::priors(HyperParams::make(d, s));
}

bool bits_equal(double a, double b) {
  return std::bit_cast<uint64_t>(a) == std::bit_cast<uint64_t>(b);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("zero model predicts zero for any input") {
  ModelState m = zero_model(3);
  CHECK(predict_ctr1(m, {"q", "u"}, {1.5, -2.0, 0.25}) == 0.0);
}

TEST_CASE("prediction is the dot product plus the pair bias") {
  ModelState m = zero_model(2);
  m.beta = {0.5, -1.0};
  m.pair_bias[{"q", "u"}] = 0.1;
  const double got = predict_ctr1(m, {"q", "u"}, {2.0, 1.0});
  CHECK(got == doctest::Approx(0.1).epsilon(1e-12));

  // independent dot-product oracle
  const FeatureVector x{2.0, 1.0};
  double expect = 0.1;
  for (size_t i = 0; i < x.size(); ++i) expect += m.beta[i] * x[i];
  CHECK(got == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("unseen key falls back to the scalar prior") {
  ModelState m = zero_model(2);
  m.hyper.b0 = 0.05;
  CHECK(predict_ctr1(m, {"never", "seen"}, {0.0, 0.0}) == 0.05);
}

TEST_CASE("CTR@p adds the position bias, with b_1 = 0") {
  ModelState m = zero_model(2);
  m.beta = {0.3, 0.0};
  m.pos_bias = {0.0, -0.12, -0.2, -0.3};
  const FeatureVector x{1.0, 0.0};
  const PairKey key{"q", "u"};
  CHECK(predict_ctr_at_p(m, key, x, 1) == predict_ctr1(m, key, x));
  CHECK(predict_ctr_at_p(m, key, x, 2) == doctest::Approx(0.18).epsilon(1e-12));

  ModelState flat = zero_model(2);
  flat.beta = {0.3, 0.0};
  for (int p = 1; p <= 4; ++p) {
    CHECK(predict_ctr_at_p(flat, key, x, p) == predict_ctr1(flat, key, x));
  }
}

TEST_CASE("contract violations: dimension and position range") {
  ModelState m = zero_model(3);
  CHECK_THROWS_AS(predict_ctr1(m, {"q", "u"}, {1.0, 2.0}), ContractViolation);
  CHECK_THROWS_AS(predict_ctr_at_p(m, {"q", "u"}, {1.0, 2.0, 3.0}, 0), ContractViolation);
  CHECK_THROWS_AS(predict_ctr_at_p(m, {"q", "u"}, {1.0, 2.0, 3.0}, 5), ContractViolation);
}

TEST_CASE("bias additivity holds to machine precision") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.next_below(6));
    ModelState with = zero_model(d);
    ModelState without = zero_model(d);
    FeatureVector x(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
      const double w = rng.next_normal();
      with.beta[static_cast<size_t>(i)] = w;
      without.beta[static_cast<size_t>(i)] = w;
      x[static_cast<size_t>(i)] = rng.next_normal();
    }
    const double c = rng.next_normal();
    const PairKey key{"q", "u"};
    with.pair_bias[key] = c;
    without.pair_bias[key] = 0.0;
    CHECK(predict_ctr1(with, key, x) == predict_ctr1(without, key, x) + c);
  }
}

TEST_CASE("the feature part is affine in x") {
  Rng rng(17);
  ModelState m = zero_model(4);
  for (auto& w : m.beta) w = rng.next_normal();
  const PairKey key{"q", "u"};
  m.pair_bias[key] = 0.0;  // bias-free score
  for (int trial = 0; trial < 30; ++trial) {
    FeatureVector x(4), y(4), blend(4);
    const double alpha = rng.next_unit();
    for (int i = 0; i < 4; ++i) {
      x[static_cast<size_t>(i)] = rng.next_normal();
      y[static_cast<size_t>(i)] = rng.next_normal();
      blend[static_cast<size_t>(i)] =
          alpha * x[static_cast<size_t>(i)] + (1.0 - alpha) * y[static_cast<size_t>(i)];
    }
    const double lhs = predict_ctr1(m, key, blend);
    const double rhs = alpha * predict_ctr1(m, key, x) + (1.0 - alpha) * predict_ctr1(m, key, y);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("unseen keys always return exactly b0") {
  Rng rng(23);
  ModelState m = zero_model(2);
  m.hyper.b0 = 0.375;
  m.pair_bias[{"q1", "u1"}] = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    const PairKey key{"q" + std::to_string(rng.next_below(1000) + 2), "u"};
    CHECK(m.bias_for(key) == 0.375);
  }
}

TEST_CASE("pair key joins with a NUL byte and splits back") {
  const PairKey key{"some query", "http://doc/1"};
  const std::string joined = key.joined();
  CHECK(joined.size() == key.query_id.size() + 1 + key.doc_id.size());
  CHECK(joined[key.query_id.size()] == '\0');
  CHECK(PairKey::split(joined) == key);
  CHECK_THROWS_AS(PairKey::split("no separator"), ContractViolation);
}

TEST_CASE("model JSON round-trips bit-exactly") {
  Rng rng(31);
  ModelState m = zero_model(5);
  m.hyper.b0 = 0.1 + rng.next_unit();
  m.hyper.lambda1 = 10.0;
  for (auto& w : m.beta) w = rng.next_normal() * std::pow(10.0, rng.next_normal());
  m.pos_bias = {0.0, -0.1 * rng.next_unit(), -0.2 * rng.next_unit(), rng.next_normal()};
  for (int i = 0; i < 40; ++i) {
    const PairKey key{"query " + std::to_string(i), "doc/" + std::to_string(i * 7)};
    m.pair_bias[key] = rng.next_normal() * std::pow(10.0, 3.0 * (rng.next_unit() - 0.5));
  }
  m.pair_bias[{"q", "-0"}] = -0.0;  // signed zero must survive

  const std::string dumped = m.to_json().dump();
  const ModelState back = ModelState::from_json(nlohmann::json::parse(dumped));
  REQUIRE(back.d() == m.d());
  for (int i = 0; i < m.d(); ++i) {
    CHECK(bits_equal(back.beta[static_cast<size_t>(i)], m.beta[static_cast<size_t>(i)]));
  }
  REQUIRE(back.pair_bias.size() == m.pair_bias.size());
  for (const auto& [key, value] : m.pair_bias) {
    REQUIRE(back.pair_bias.contains(key));
    CHECK(bits_equal(back.pair_bias.at(key), value));
  }
  for (size_t i = 0; i < m.pos_bias.size(); ++i) CHECK(bits_equal(back.pos_bias[i], m.pos_bias[i]));
  CHECK(bits_equal(back.hyper.b0, m.hyper.b0));
  // second round trip is byte-stable
  CHECK(back.to_json().dump() == dumped);
}

TEST_CASE("invalid states are rejected") {
  ModelState m = zero_model(2);
  m.beta[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(m.validate(), ContractViolation);

  ModelState m2 = zero_model(2);
  m2.pos_bias[0] = 0.5;
  CHECK_THROWS_AS(m2.validate(), ContractViolation);

  CHECK_THROWS_AS(HyperParams::make(2, 4, 0.0), ContractViolation);
}

}  // TEST_SUITE
