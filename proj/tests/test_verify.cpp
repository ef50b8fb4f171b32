#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"

#include "hmog/parallel.hpp"
#include "hmog/verify.hpp"
#include "oracles.hpp"

using namespace hmog;

namespace {

Template plain_template(std::string user, Eigen::VectorXd mu, Eigen::VectorXd sigma,
                        std::vector<std::string> features) {
  Template t;
  t.user_id = std::move(user);
  t.features = std::move(features);
  t.mean = mu;
  t.stdev = sigma;
  t.score_mean = mu;
  t.score_stdev = sigma;
  t.count = 80;
  return t;
}

std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, double shift, bool ties) {
  std::normal_distribution<double> d(shift, 1.0);
  std::vector<double> out(n);
  for (auto& x : out) x = ties ? std::round(2.0 * d(rng)) / 2.0 : d(rng);
  return out;
}

}  // namespace

TEST_CASE("scaled distances") {
  const Eigen::Vector2d mu(1, 2), sigma(1, 2), v(2, 4);
  CHECK(scaled_manhattan(v, mu, sigma) == doctest::Approx(2.0));
  CHECK(scaled_euclidean(v, mu, sigma) == doctest::Approx(std::sqrt(2.0)));
  CHECK(scaled_manhattan(mu, mu, sigma) == 0.0);
  CHECK(scaled_euclidean(mu, mu, sigma) == 0.0);
  CHECK(scaled_manhattan(v, mu, Eigen::Vector2d(2 * sigma)) == doctest::Approx(1.0));
  CHECK(scaled_euclidean(v, mu, Eigen::Vector2d(2 * sigma)) == doctest::Approx(std::sqrt(2.0) / 2));

  const auto t = plain_template("a", mu, sigma, {"x", "y"});
  CHECK(score(t, v, Verifier::scaled_manhattan) == doctest::Approx(2.0));
  CHECK(score(t, v, Verifier::scaled_euclidean) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(score(t, Eigen::Vector3d(1, 2, 3), Verifier::scaled_manhattan), Error);
  CHECK(parse_verifier("se") == Verifier::scaled_euclidean);
  CHECK_FALSE(parse_verifier("l1").has_value());
}

TEST_CASE("fusion arithmetic") {
  const std::vector<double> w3{0.5, 0.3, 0.2};
  const std::vector<std::optional<double>> one{std::nullopt, 0.7, std::nullopt};
  CHECK(fuse(one, w3) == doctest::Approx(0.7));
  const std::vector<std::optional<double>> missing{1.0, 0.0, std::nullopt};
  CHECK(fuse(missing, w3) == doctest::Approx(0.5 / 0.8));
  const std::vector<std::optional<double>> other{0.0, 1.0, std::nullopt};
  CHECK(fuse(other, w3) == doctest::Approx(0.3 / 0.8));
  const std::vector<std::optional<double>> pair{0.2, 0.4};
  CHECK(fuse(pair, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.3));
  const std::vector<std::optional<double>> all{0.25, 0.5, 0.75};
  CHECK(fuse(all, std::vector<double>{1, 0, 0}) == 0.25);
  // Present channels all weigh zero: equal weights.
  const std::vector<std::optional<double>> zeroed{std::nullopt, 0.2, 0.6};
  CHECK(fuse(zeroed, std::vector<double>{1, 0, 0}) == doctest::Approx(0.4));
  const std::vector<std::optional<double>> none{std::nullopt, std::nullopt};
  CHECK_THROWS_AS(fuse(none, std::vector<double>{0.5, 0.5}), Error);
  CHECK_THROWS_AS(fuse(pair, w3), Error);

  const std::vector<double> pool{2, 4, 6};
  const auto mm = fit_min_max(pool);
  CHECK(mm(4) == 0.5);
  CHECK(fit_min_max(std::vector<double>{3, 3})(3) == 0.0);
}

TEST_CASE("score generation") {
  const std::vector<Template> ts{plain_template("a", Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), {"x", "y"}),
                                 plain_template("b", Eigen::Vector2d(5, 5), Eigen::Vector2d(1, 1), {"x", "y"})};
  FeatureMatrixBuilder b({"y", "x"});
  for (int i = 0; i < 3; ++i) {
    b.add("a", "a1", i, std::vector<double>{0.1 * i, 0.0});
    b.add("b", "b1", i, std::vector<double>{5.0, 5.0 + 0.1 * i});
  }
  b.add("c", "c1", 0, std::vector<double>{1.0, 1.0});
  const auto auth = std::move(b).build();
  const auto s = gen_scores(ts, auth, Verifier::scaled_manhattan);
  CHECK(s.genuine.size() == 6);
  CHECK(s.impostor.size() == 6);
  for (const auto& e : s.genuine) CHECK(e.score < 1.0);
  for (const auto& e : s.impostor) CHECK(e.score > 9.0);
  CHECK(s.genuine[0].claimed == "a");
  CHECK(s.impostor[0].claimed == "b");
  CHECK(s.impostor[0].actual == "a");
  CHECK(eer(s) == 0.0);

  const std::vector<Template> solo{ts[0]};
  const auto alone = gen_scores(solo, auth, Verifier::scaled_manhattan);
  CHECK(alone.genuine.size() == 3);
  CHECK(alone.impostor.empty());

  // Identical users: the two distributions coincide.
  const std::vector<Template> twins{plain_template("a", Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), {"x", "y"}),
                                    plain_template("b", Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), {"x", "y"})};
  FeatureMatrixBuilder tb({"x", "y"});
  for (int i = 0; i < 4; ++i) {
    tb.add("a", "a1", i, std::vector<double>{double(i), 1.0});
    tb.add("b", "b1", i, std::vector<double>{double(i), 1.0});
  }
  const auto same = gen_scores(twins, std::move(tb).build(), Verifier::scaled_euclidean);
  auto g = same.genuine_scores();
  auto im = same.impostor_scores();
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  CHECK(g == im);
  CHECK(eer(same) == doctest::Approx(0.5).epsilon(1e-12));

  // Worker count does not change the output.
  set_worker_count(4);
  const auto parallel = gen_scores(ts, auth, Verifier::scaled_manhattan);
  set_worker_count(0);
  CHECK(parallel.genuine == s.genuine);
  CHECK(parallel.impostor == s.impostor);
}

TEST_CASE("equal error rate examples") {
  CHECK(eer(std::vector<double>{1, 2, 4}, std::vector<double>{3, 5, 6}) == doctest::Approx(1.0 / 3.0));
  CHECK(eer(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == doctest::Approx(0.5));
  CHECK(eer(std::vector<double>{1, 2}, std::vector<double>{3, 4, 5}) == 0.0);
  CHECK(eer(std::vector<double>{5}, std::vector<double>{1}) == 1.0);
  CHECK_THROWS_AS(eer(std::vector<double>{}, std::vector<double>{1}), Error);
}

TEST_CASE("equal error rate against the threshold sweep oracle") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_scores(rng, 1 + rng() % 40, 0.0, trial % 3 == 0);
    const auto i = random_scores(rng, 1 + rng() % 60, 1.5, trial % 3 == 0);
    CHECK(std::abs(eer(g, i) - oracle::eer(g, i)) <= 1e-12);
  }
}

TEST_CASE("equal error rate properties") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const auto g = random_scores(rng, 2 + rng() % 30, 0.0, trial % 2 == 0);
    const auto i = random_scores(rng, 2 + rng() % 30, 1.0, trial % 2 == 0);
    const double base = eer(g, i);
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);

    // Strictly increasing transform.
    auto tg = g, ti = i;
    for (auto* v : {&tg, &ti}) {
      for (auto& x : *v) x = std::exp(x) + 3.0 * x;
    }
    CHECK(eer(tg, ti) == doctest::Approx(base).epsilon(1e-12));

    // Swapping the roles needs the score direction flipped too, since lower
    // distances are accepted.
    auto ng = i, ni = g;
    for (auto* v : {&ng, &ni}) {
      for (auto& x : *v) x = -x;
    }
    CHECK(eer(ng, ni) == doctest::Approx(base).epsilon(1e-12));

    const auto curve = det_curve(g, i);
    CHECK(curve.front().far == 0.0);
    CHECK(curve.front().frr == 1.0);
    CHECK(curve.back().frr == 0.0);
    CHECK(curve.back().far == 1.0);
    for (std::size_t k = 1; k < curve.size(); ++k) {
      CHECK(curve[k].threshold > curve[k - 1].threshold);
      CHECK(curve[k].far >= curve[k - 1].far);
      CHECK(curve[k].frr <= curve[k - 1].frr);
      const auto at = rates_at(g, i, curve[k].threshold);
      CHECK(at.far == curve[k].far);
      CHECK(at.frr == doctest::Approx(curve[k].frr).epsilon(1e-12));
    }
    // Reflection of the DET curve under the swap.
    const auto swapped = det_curve(ng, ni);
    REQUIRE(swapped.size() == curve.size());
    for (std::size_t k = 1; k < curve.size(); ++k) {
      const auto& a = curve[k];
      // Threshold -t on the swapped lists exchanges the rates at t - 0.
      const auto r = rates_at(ng, ni, -a.threshold);
      const auto strict = rates_at(g, i, std::nextafter(a.threshold, -INFINITY));
      CHECK(r.far == doctest::Approx(strict.frr).epsilon(1e-12));
      CHECK(r.frr == doctest::Approx(strict.far).epsilon(1e-12));
    }
  }
}

TEST_CASE("score and curve files") {
  ScoreSet s;
  s.genuine.push_back({"a", "a", "a_3", 1000, 0.125});
  s.impostor.push_back({"b", "a", "a_3", 1000, 7.5});
  std::stringstream buf;
  write_scores_csv(buf, s);
  const auto back = read_scores_csv(buf);
  CHECK(back.genuine == s.genuine);
  CHECK(back.impostor == s.impostor);

  std::stringstream bad("kind,claimed,actual,t_ms,score\nmaybe,a,a,0,1\n");
  CHECK_THROWS_AS(read_scores_csv(bad), Error);

  std::stringstream det;
  write_det_csv(det, det_curve(std::vector<double>{1}, std::vector<double>{2}));
  CHECK(det.str() == "threshold,far,frr\n-inf,0,1\n1,0,0\n2,1,0\n");
}

TEST_CASE("fusion tables and weight search") {
  const auto grid = simplex_grid(3, 0.5);
  REQUIRE(grid.size() == 6);
  CHECK(grid[0] == std::vector<double>{1, 0, 0});
  CHECK(grid[1] == std::vector<double>{0.5, 0.5, 0});
  CHECK(grid[5] == std::vector<double>{0, 0, 1});
  CHECK(simplex_grid(4, 0.05).size() == 1771);
  for (const auto& w : simplex_grid(3, 0.05)) {
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(simplex_grid(2, 0.3), Error);

  // Channel "good" separates, "bad" is reversed; "sparse" misses some rows.
  ScoreSet good, bad, sparse;
  for (int t = 0; t < 10; ++t) {
    good.genuine.push_back({"a", "a", "s", t, 1.0 + 0.01 * t});
    good.impostor.push_back({"b", "a", "s", t, 3.0 + 0.01 * t});
    bad.genuine.push_back({"a", "a", "s", t, 9.0});
    bad.impostor.push_back({"b", "a", "s", t, 1.0});
    if (t % 2 == 0) sparse.genuine.push_back({"a", "a", "s", t, 4.0});
  }
  const std::vector<std::string> names{"good", "bad", "sparse"};
  const std::vector<ScoreSet> sets{good, bad, sparse};
  const auto table = align_scores(names, sets);
  CHECK(table.keys.size() == 20);
  CHECK(table.bounds[0].min == 1.0);
  CHECK(table.bounds[1].max == 9.0);
  CHECK(std::isnan(table.scores(1, 2)));

  const auto only_first = fuse_table(table, std::vector<double>{1, 0, 0});
  CHECK(eer(only_first) == 0.0);
  const auto best = search_fusion_weights(table, 0.5);
  CHECK(best.eer == 0.0);
  CHECK(best.weights == std::vector<double>{1, 0, 0});
  const auto only_bad = fuse_table(table, std::vector<double>{0, 1, 0});
  CHECK(eer(only_bad) > 0.5);
}
