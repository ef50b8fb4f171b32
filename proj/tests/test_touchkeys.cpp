#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "hmog/features.hpp"
#include "hmog/touchkeys.hpp"

using namespace hmog;

namespace {

Session with_taps(std::vector<TapEvent> taps) {
  Session s;
  s.user_id = "u";
  s.session_id = "s1";
  s.taps = std::move(taps);
  return s;
}

TapEvent tap(Millis t0, Millis t1, std::vector<double> contact, double x = 0, double y = 0) {
  TapEvent t{t0, t1, {}};
  Millis at = t0;
  for (double c : contact) t.samples.push_back({at++, x, y, c});
  return t;
}

Session with_keys(std::vector<KeyEvent> keys) {
  Session s;
  s.user_id = "u";
  s.session_id = "s1";
  s.keys = std::move(keys);
  return s;
}

}  // namespace

TEST_CASE("feature spaces") {
  CHECK(tap_feature_names().size() == 11);
  CHECK(kTapFeatureCount == 11);
  CHECK(digraph_feature_names().size() == 1225);
  CHECK(digraph_feature_names().front() == "dg_a_a");
  CHECK(digraph_feature_names().back() == "dg_apostrophe_apostrophe");
  CHECK(key_hold_feature_names(KeyUniverse()).size() == 35);
  const KeyUniverse extended({"1", "2", "a"});
  CHECK(key_hold_feature_names(extended).size() == 37);
  CHECK(extended.contains("2"));
  CHECK_FALSE(KeyUniverse().contains("2"));
}

TEST_CASE("contact statistics") {
  const auto single = tap_features(with_taps({tap(0, 50, {0.4})})).matrix;
  REQUIRE(single.rows() == 1);
  for (Eigen::Index c = 1; c <= 9; ++c) {
    if (c == 3) {
      CHECK(single.values(0, c) == 0.0);
    } else {
      CHECK(single.values(0, c) == 0.4);
    }
  }
  CHECK(std::isnan(single.values(0, 10)));
  CHECK(single.values(0, 0) == 50.0);

  const auto four = tap_features(with_taps({tap(0, 80, {3, 1, 4, 2})})).matrix;
  CHECK(four.values(0, 4) == doctest::Approx(1.75));
  CHECK(four.values(0, 5) == doctest::Approx(2.5));
  CHECK(four.values(0, 2) == doctest::Approx(2.5));
  CHECK(four.values(0, 6) == doctest::Approx(3.25));
  CHECK(four.values(0, 7) == 3.0);
  CHECK(four.values(0, 8) == 1.0);
  CHECK(four.values(0, 9) == 4.0);
  CHECK(four.values(0, 1) == doctest::Approx(2.5));
  CHECK(four.values(0, 3) == doctest::Approx(std::sqrt(1.25)));
}

TEST_CASE("velocity between consecutive presses") {
  const auto m = tap_features(with_taps({tap(0, 50, {0.3}, 0, 0), tap(100, 150, {0.3}, 30, 40)})).matrix;
  REQUIRE(m.rows() == 2);
  CHECK(std::isnan(m.values(0, 10)));
  CHECK(m.values(1, 10) == doctest::Approx(500.0));
}

TEST_CASE("degenerate taps are skipped") {
  const auto r = tap_features(with_taps({tap(0, 50, {}), tap(60, 60, {0.2}), tap(100, 150, {0.3})}));
  CHECK(r.skipped == 2);
  CHECK(r.matrix.rows() == 1);
}

TEST_CASE("contact statistics are order independent and ordered") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> c(1 + rng() % 12);
    for (auto& x : c) x = u(rng);
    auto shuffled = c;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    // Keep the first sample in place: it is a feature of its own.
    std::swap(*std::find(shuffled.begin(), shuffled.end(), c[0]), shuffled[0]);
    const auto a = tap_features(with_taps({tap(0, 100, c)})).matrix;
    const auto b = tap_features(with_taps({tap(0, 100, shuffled)})).matrix;
    for (Eigen::Index k = 0; k < 10; ++k) CHECK(a.values(0, k) == doctest::Approx(b.values(0, k)));
    CHECK(a.values(0, 8) <= a.values(0, 4));
    CHECK(a.values(0, 4) <= a.values(0, 5));
    CHECK(a.values(0, 5) <= a.values(0, 6));
    CHECK(a.values(0, 6) <= a.values(0, 9));
    CHECK(a.values(0, 5) == a.values(0, 2));
  }
}

TEST_CASE("key holds and digraphs") {
  const auto k = keystroke_features(with_keys({{"a", 100, 180}, {"b", 350, 420}, {"7", 500, 560},
                                               {"c", 600, 650}}));
  REQUIRE(k.holds.size() == 3);
  CHECK(k.holds[0].feature == "hold_a");
  CHECK(k.holds[0].value == 80.0);
  CHECK(k.holds[0].t_ms == 100);
  REQUIRE(k.digraphs.size() == 1);
  CHECK(k.digraphs[0].feature == "dg_a_b");
  CHECK(k.digraphs[0].value == 250.0);
  CHECK(k.digraphs[0].t_ms == 350);

  const auto ext = keystroke_features(with_keys({{"7", 500, 560}}), KeyUniverse({"7"}));
  REQUIRE(ext.holds.size() == 1);
  CHECK(ext.holds[0].feature == "hold_7");
}

TEST_CASE("latency outlier filter") {
  std::vector<SparseFeatureRow> holds{{"u", "s", 0, "hold_a", 150}, {"u", "s", 1, "hold_a", 250}};
  const auto kept = latency_outlier_filter(holds, 200, 0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].value == 150);

  std::vector<SparseFeatureRow> rows{{"u", "s", 0, "hold_a", 100},
                                     {"u", "s", 1, "hold_a", 110},
                                     {"u", "s", 2, "hold_b", 90}};
  const auto m2 = latency_outlier_filter(rows, std::numeric_limits<double>::infinity(), 2);
  CHECK(m2.size() == 2);
  CHECK(std::none_of(m2.begin(), m2.end(), [](const auto& r) { return r.feature == "hold_b"; }));
  CHECK(latency_outlier_filter(rows).size() == rows.size());

  // Idempotent on random inputs.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SparseFeatureRow> r;
    for (int i = 0; i < 40; ++i) {
      r.push_back({"u", "s", i, "hold_" + std::string(1, char('a' + rng() % 6)),
                   double(rng() % 400)});
    }
    const double l = double(100 + rng() % 300);
    const std::size_t m = rng() % 8;
    const auto once = latency_outlier_filter(r, l, m);
    const auto twice = latency_outlier_filter(once, l, m);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(once[i].feature == twice[i].feature);
      CHECK(once[i].value == twice[i].value);
    }
  }
}

TEST_CASE("sparse rows become dense") {
  std::vector<SparseFeatureRow> rows{{"u", "s", 0, "hold_a", 100}, {"u", "s", 5, "hold_b", 90}};
  const auto d = to_dense(rows, key_hold_feature_names(KeyUniverse()));
  REQUIRE(d.rows() == 2);
  CHECK(d.values(0, 0) == 100.0);
  CHECK(std::isnan(d.values(0, 1)));
  CHECK(d.values(1, 1) == 90.0);
}
