#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"

#include "hmog/cross_validation.hpp"
#include "hmog/parallel.hpp"
#include "hmog/pipeline.hpp"

using namespace hmog;

namespace {

// Rows given as (user, t_ms, values).
struct Row {
  std::string user;
  Millis t;
  std::vector<double> v;
};

FeatureMatrix matrix(std::vector<std::string> columns, const std::vector<Row>& rows) {
  FeatureMatrixBuilder b(std::move(columns));
  for (const auto& r : rows) b.add(r.user, r.user + "_s", r.t, r.v);
  return std::move(b).build();
}

FeatureMatrix gaussian_users(std::size_t users, std::size_t per_user, std::size_t d,
                             std::uint64_t seed, double spread = 3.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::string> cols;
  for (std::size_t c = 0; c < d; ++c) cols.push_back("f" + std::to_string(c));
  std::vector<Row> rows;
  for (std::size_t u = 0; u < users; ++u) {
    std::vector<double> centre(d);
    for (auto& x : centre) x = spread * noise(rng);
    for (std::size_t i = 0; i < per_user; ++i) {
      std::vector<double> v(d);
      for (std::size_t c = 0; c < d; ++c) v[c] = centre[c] + noise(rng);
      rows.push_back({"u" + std::to_string(u), Millis(i) * 1000, v});
    }
  }
  return matrix(cols, rows);
}

// Characteristic polynomial coefficients by Faddeev-LeVerrier:
// det(tI - A) = t^n + c[1] t^(n-1) + ... + c[n].
std::vector<double> characteristic_polynomial(const Eigen::MatrixXd& a) {
  const auto n = a.rows();
  std::vector<double> c(std::size_t(n) + 1, 0.0);
  c[0] = 1.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[std::size_t(k - 1)] * Eigen::MatrixXd::Identity(n, n);
    c[std::size_t(k)] = -(a * m).trace() / double(k);
  }
  return c;
}

double evaluate(const std::vector<double>& c, double t) {
  double v = 0.0;
  for (double x : c) v = v * t + x;
  return v;
}

// Real roots in [lo, hi] by sign-change scan and bisection.
std::vector<double> real_roots(const std::vector<double>& c, double lo, double hi) {
  std::vector<double> roots;
  const int steps = 200000;
  double prev_t = lo;
  double prev = evaluate(c, lo);
  for (int i = 1; i <= steps; ++i) {
    const double t = lo + (hi - lo) * double(i) / steps;
    const double v = evaluate(c, t);
    if (prev == 0.0) roots.push_back(prev_t);
    if ((prev < 0.0) != (v < 0.0) && prev != 0.0 && v != 0.0) {
      double a = prev_t, b = t, fa = prev;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = evaluate(c, mid);
        if ((fm < 0.0) == (fa < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev_t = t;
    prev = v;
  }
  std::sort(roots.rbegin(), roots.rend());
  return roots;
}

}  // namespace

TEST_CASE("fisher scores") {
  const auto x = matrix({"f", "same", "split"}, {{"A", 0, {0, 7, 1}},
                                                {"A", 1, {2, 7, 1}},
                                                {"B", 0, {4, 7, 3}},
                                                {"B", 1, {6, 7, 3}}});
  const auto s = fisher_scores(x);
  CHECK(s[0] == doctest::Approx(4.0));
  CHECK(s[1] == 0.0);
  // Between-user variance 1 over the floored within variance.
  CHECK(s[2] == doctest::Approx(1.0 / (kSigmaFloor * kSigmaFloor)));
  CHECK(std::isfinite(s[2]));

  const auto single = matrix({"f"}, {{"A", 0, {1}}, {"A", 1, {2}}});
  CHECK_THROWS_AS(fisher_scores(single), Error);
}

TEST_CASE("fisher score under shifts and rescaling") {
  auto x = gaussian_users(4, 20, 3, 8);
  const auto base = fisher_scores(x);
  auto shifted = x;
  shifted.values.col(1).array() += 123.0;
  shifted.values.col(2).array() *= 7.5;
  const auto moved = fisher_scores(shifted);
  for (Eigen::Index c = 0; c < 3; ++c) CHECK(moved[c] == doctest::Approx(base[c]).epsilon(1e-9));
}

TEST_CASE("fisher selection") {
  const Eigen::Vector3d scores(5, 3, 2);
  CHECK(select_by_fisher(scores, 0.8) == std::vector<Eigen::Index>{0, 1});
  CHECK(select_by_fisher(scores, 0.81) == std::vector<Eigen::Index>{0, 1, 2});
  CHECK(select_by_fisher(scores, 1.0).size() == 3);
  const Eigen::Vector4d with_zero(0, 5, 0, 1);
  CHECK(select_by_fisher(with_zero, 1.0) == std::vector<Eigen::Index>{1, 3, 0, 2});
  const Eigen::Vector3d tied(2, 2, 1);
  CHECK(select_by_fisher(tied, 0.5) == std::vector<Eigen::Index>{0, 1});
  CHECK_THROWS(select_by_fisher(scores, 0.0));

  // A larger fraction never drops a feature.
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd s(8);
    for (auto& v : s) v = u(rng);
    const double a = 0.8 + 0.2 * u(rng) / 10.0;
    const double b = std::min(1.0, a + 0.05);
    const auto small = select_by_fisher(s, a);
    const auto large = select_by_fisher(s, b);
    const std::set<Eigen::Index> big(large.begin(), large.end());
    for (auto i : small) CHECK(big.count(i) == 1);
    // Smallest prefix reaching the target.
    double sum = 0.0;
    for (auto i : small) sum += s[i];
    CHECK(sum >= a * s.sum() * (1 - 1e-12));
    CHECK(sum - s[small.back()] < a * s.sum());
  }
}

TEST_CASE("mutual information by counting") {
  const std::vector<int> a{0, 0, 1, 1};
  const std::vector<int> b{0, 0, 1, 1};
  const std::vector<int> c{0, 1, 0, 1};
  CHECK(mutual_information(a, b) == doctest::Approx(1.0));
  CHECK(mutual_information(a, c) == doctest::Approx(0.0));
  CHECK(mutual_information(a, a) == doctest::Approx(1.0));

  const auto bins = discretize_equal_frequency(Eigen::Vector4d(4, 1, kInvalid, 2), 2);
  CHECK(bins == std::vector<int>{1, 0, 2, 1});
}

TEST_CASE("mrmr selection") {
  // Two users; f0 equals the label, f1 is noise, f2 duplicates f0.
  std::vector<Row> rows;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 40; ++i) {
    const bool b = i % 2 == 1;
    const double label = b ? 1.0 : 0.0;
    rows.push_back({b ? "B" : "A", i, {label, double(rng() % 100), label}});
  }
  const auto x = matrix({"label", "noise", "copy"}, rows);
  CHECK(mrmr_select(x, std::numeric_limits<double>::infinity()).empty());
  const auto picked = mrmr_select(x, 0.0);
  REQUIRE_FALSE(picked.empty());
  CHECK(picked.front() == 0);
  CHECK(std::find(picked.begin(), picked.end(), 2) == picked.end());
}

TEST_CASE("pca") {
  const auto x = gaussian_users(1, 30, 5, 77).values;
  const Eigen::MatrixXd m = x;
  const auto full = pca_fit(m, 1.0);
  CHECK(full.dimension() == 5);
  const Eigen::MatrixXd gram = full.components.transpose() * full.components;
  CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-9);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::VectorXd v = m.row(r).transpose();
    CHECK((pca_reconstruct(full, pca_transform(full, v)) - v).cwiseAbs().maxCoeff() <= 1e-9);
  }
  CHECK(full.variance_fraction.sum() == doctest::Approx(1.0));

  // Fewer vectors than features: rank n-1.
  const Eigen::MatrixXd few = m.topRows(3);
  CHECK(pca_fit(few, 1.0).dimension() == 2);

  Eigen::MatrixXd line(6, 2);
  for (int i = 0; i < 6; ++i) line.row(i) << i, 2.0 * i + 1.0;
  CHECK(pca_fit(line, 0.90).dimension() == 1);

  Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 3);
  CHECK_THROWS_AS(pca_fit(same, 1.0), Error);
  CHECK_THROWS_AS(pca_fit(m.topRows(1), 1.0), Error);
}

TEST_CASE("pca variances against the characteristic polynomial") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Eigen::MatrixXd m = gaussian_users(1, 40, 5, seed).values;
    const Eigen::MatrixXd centred = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = centred.transpose() * centred / double(m.rows() - 1);
    const auto roots = real_roots(characteristic_polynomial(cov), 0.0, cov.trace() * 1.01);
    REQUIRE(roots.size() == 5);
    const auto basis = pca_fit(m, 1.0);
    REQUIRE(basis.dimension() == 5);
    for (int i = 0; i < 5; ++i) {
      CHECK(std::abs(basis.variances[i] - roots[std::size_t(i)]) <= 1e-9 * std::max(1.0, roots[std::size_t(i)]));
    }
  }
}

TEST_CASE("templates") {
  const auto two = matrix({"a", "b"}, {{"u", 0, {0, 0}}, {"u", 1, {2, 4}}});
  const std::vector<Eigen::Index> both{0, 1};
  const auto t = build_template(two, both, PipelineParams{}, 2);
  CHECK(t.mean == Eigen::Vector2d(1, 2));
  CHECK(t.stdev == Eigen::Vector2d(1, 2));
  CHECK(t.score_stdev == t.stdev);
  CHECK(t.count == 2);

  std::vector<Row> rows;
  for (int i = 0; i < 79; ++i) rows.push_back({"u", i, {3.0, 4.0}});
  const auto short_by_one = matrix({"a", "b"}, rows);
  CHECK_THROWS_AS(build_template(short_by_one, both, PipelineParams{}), EnrollmentFailure);
  rows.push_back({"u", 79, {3.0, 4.0}});
  const auto constant = build_template(matrix({"a", "b"}, rows), both, PipelineParams{});
  CHECK(constant.mean == Eigen::Vector2d(3, 4));
  CHECK(constant.stdev == Eigen::Vector2d::Constant(kSigmaFloor));

  // Columns with no valid value are dropped; invalid cells are imputed.
  const auto gaps = matrix({"a", "b"}, {{"u", 0, {1, kInvalid}}, {"u", 1, {3, kInvalid}}});
  const auto g = build_template(gaps, both, PipelineParams{}, 2);
  CHECK(g.features == std::vector<std::string>{"a"});
  const std::vector<std::string> source{"b", "a"};
  const auto idx = g.resolve(source);
  CHECK(idx == std::vector<Eigen::Index>{1});
  CHECK(g.project(Eigen::RowVector2d(9, kInvalid), idx)[0] == 2.0);
  CHECK(g.resolve({"z"}) == std::vector<Eigen::Index>{-1});
}

TEST_CASE("template with pca and round trip") {
  auto x = gaussian_users(1, 100, 4, 3);
  PipelineParams p;
  p.selector = Selector::fisher;
  p.fisher_fraction = 0.9;
  p.pca_fraction = 0.95;
  p.l_ms = 250.0;
  const std::vector<Eigen::Index> all{0, 1, 2, 3};
  const auto t = build_template(x, all, PipelineParams{.pca_fraction = 0.95});
  REQUIRE(t.pca.has_value());
  // Projected training vectors are centred.
  CHECK(t.score_mean.cwiseAbs().maxCoeff() <= 1e-9);

  auto plain = build_template(x, all, PipelineParams{});
  plain.params = p;
  std::stringstream buf;
  const std::vector<Template> ts{t, plain};
  write_templates(buf, ts);
  const auto back = read_templates(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].features == t.features);
  CHECK(back[0].mean == t.mean);
  CHECK(back[0].stdev == t.stdev);
  CHECK(back[0].pca->components == t.pca->components);
  CHECK(back[0].pca->variances == t.pca->variances);
  CHECK(back[0].score_stdev == t.score_stdev);
  CHECK(back[1].params == p);
  CHECK_FALSE(back[1].pca.has_value());

  std::stringstream bad("{\"format\": \"other\"}");
  CHECK_THROWS_AS(read_templates(bad), Error);
}

TEST_CASE("parameter validation") {
  PipelineParams p;
  p.selector = Selector::fisher;
  p.fisher_fraction = 0.79;
  CHECK_THROWS_AS(validate(p), Error);
  p.fisher_fraction = 0.8;
  validate(p);
  p.pca_fraction = 0.93;
  CHECK_THROWS_AS(validate(p), Error);
  p.pca_fraction = 0.98;
  validate(p);
  p.scan_seconds = 0.0;
  CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("scan aggregation") {
  const auto one = matrix({"a", "b"}, {{"u", 100, {0, 0}}, {"u", 5000, {2, 2}}, {"u", 9000, {4, 5}}});
  const auto single = scan_aggregate(one, 20.0);
  REQUIRE(single.rows() == 1);
  CHECK(single.values(0, 0) == 2.0);
  CHECK(single.values(0, 1) == doctest::Approx(7.0 / 3.0));
  CHECK(single.t_ms[0] == 100);

  const auto split = matrix({"a"}, {{"u", 0, {1}}, {"u", 25000, {9}}});
  const auto s = scan_aggregate(split, 20.0);
  REQUIRE(s.rows() == 2);
  CHECK(s.values(0, 0) == 1.0);
  CHECK(s.values(1, 0) == 9.0);
  CHECK(s.t_ms[1] == 20000);

  const auto pair = matrix({"a", "b"}, {{"u", 0, {0, 0}}, {"u", 10, {2, 2}}});
  CHECK(scan_aggregate(pair, 1.0).values.row(0) == Eigen::RowVector2d(1, 1));

  const auto gaps = matrix({"a", "b"}, {{"u", 0, {1, kInvalid}}, {"u", 10, {3, kInvalid}}});
  const auto g = scan_aggregate(gaps, 1.0);
  CHECK(g.values(0, 0) == 2.0);
  CHECK(std::isnan(g.values(0, 1)));

  CHECK(scan_aggregate(split, 20.0, Millis(-15000)).t_ms[0] == -15000);
  CHECK_THROWS(scan_aggregate(split, 0.0));

  // Every input vector lands in exactly one window.
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Row> rows;
    const int n = 1 + int(rng() % 60);
    Millis t = Millis(rng() % 1000);
    for (int i = 0; i < n; ++i) {
      t += Millis(rng() % 4000);
      rows.push_back({i % 3 == 0 ? "a" : "b", t, {1.0}});
    }
    const auto m = matrix({"count"}, rows);
    const double seconds = 1.0 + double(rng() % 20);
    // Sum of per-window means times window sizes, with a unit column, is the row count.
    std::size_t consumed = 0;
    const auto agg = scan_aggregate(m, seconds);
    for (const auto& user : {std::string("a"), std::string("b")}) {
      const auto mine = m.rows_of_user(user);
      if (mine.rows() == 0) continue;
      const auto windows = scan_aggregate(mine, seconds);
      std::set<Millis> starts(windows.t_ms.begin(), windows.t_ms.end());
      CHECK(starts.size() == windows.t_ms.size());
      for (std::size_t w = 0; w < windows.t_ms.size(); ++w) {
        const Millis lo = windows.t_ms[w];
        const Millis hi = lo + Millis(seconds * 1000);
        for (Millis tt : mine.t_ms) consumed += tt >= lo && tt < hi;
      }
    }
    CHECK(consumed == std::size_t(n));
    CHECK(agg.rows() <= n);
  }
}

TEST_CASE("latency filter and interquartile trimming") {
  const auto x = matrix({"hold_a", "hold_b"}, {{"u", 0, {150, kInvalid}},
                                               {"u", 1, {250, kInvalid}},
                                               {"u", 2, {kInvalid, 90}}});
  const auto l = latency_filter(x, 200, 0);
  CHECK(l.rows() == 2);
  CHECK(l.values(0, 0) == 150);
  const auto m = latency_filter(x, std::numeric_limits<double>::infinity(), 2);
  CHECK(m.rows() == 2);
  CHECK(m.values.col(1).array().isNaN().all());
  CHECK(latency_filter(x, std::numeric_limits<double>::infinity(), 0).values.array().isNaN().count() == 3);

  const auto y = matrix({"a"}, {{"u", 0, {1}}, {"u", 1, {2}}, {"u", 2, {3}}, {"u", 3, {4}}, {"u", 4, {100}}});
  const auto trimmed = iqr_trim(y);
  CHECK(std::isnan(trimmed.values(4, 0)));
  CHECK(trimmed.values(3, 0) == 4);
}

TEST_CASE("chronological folds") {
  const auto x = gaussian_users(2, 10, 1, 1);
  const auto folds = chronological_folds(x, 3);
  REQUIRE(folds.size() == 20);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t i = 1; i < 10; ++i) CHECK(folds[u * 10 + i] >= folds[u * 10 + i - 1]);
    std::vector<int> sizes(3, 0);
    for (std::size_t i = 0; i < 10; ++i) ++sizes[folds[u * 10 + i]];
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  }
}

TEST_CASE("majority vote") {
  std::vector<PipelineParams> grid(2);
  grid[1].pca_fraction = 0.9;
  const std::vector<std::size_t> votes{0, 0, 1, 0, 1, 0, 0};
  const std::vector<double> features{4, 4};
  CHECK(majority_vote(votes, features, grid) == 0);

  const std::vector<std::size_t> split{0, 1};
  CHECK(majority_vote(split, std::vector<double>{5, 3}, grid) == 1);
  CHECK(majority_vote(split, std::vector<double>{3, 5}, grid) == 0);
  // Equal feature counts: lower PCA fraction wins.
  CHECK(majority_vote(split, features, grid) == 1);
  std::vector<PipelineParams> plain(2);
  CHECK(majority_vote(split, features, plain) == 0);
}

TEST_CASE("cross validation") {
  const auto x = gaussian_users(4, 40, 3, 9, 4.0);
  const std::vector<double> scans{1.0, 3.0};
  CvOptions opt;
  opt.folds = 4;

  std::vector<PipelineParams> one(1);
  CHECK(cross_validate(x, one, scans, opt).chosen == 0);

  // The empty selector scores 0.5 on every fold; the full set wins every scan.
  std::vector<PipelineParams> grid(2);
  grid[0].selector = Selector::mrmr;
  grid[0].mrmr_threshold = std::numeric_limits<double>::infinity();
  const auto r = cross_validate(x, grid, scans, opt);
  CHECK(r.chosen == 1);
  CHECK(r.winners == std::vector<std::size_t>{1, 1});
  CHECK(r.mean_eer[0][0] == 0.5);
  CHECK(r.mean_eer[0][1] < 0.5);

  // Same answer with workers.
  set_worker_count(3);
  const auto again = cross_validate(x, grid, scans, opt);
  set_worker_count(0);
  CHECK(again.mean_eer == r.mean_eer);
}
