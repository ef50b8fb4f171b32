#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"

#include "hmog/bkg/commitment.hpp"
#include "hmog/bkg/discretize.hpp"
#include "hmog/bkg/field.hpp"
#include "hmog/bkg/grs.hpp"
#include "hmog/bkg/guessing.hpp"
#include "hmog/error.hpp"
#include "oracles.hpp"

using namespace hmog;
using namespace hmog::bkg;

namespace {

std::size_t rank_mod_p(std::vector<Word> m, Symbol p) {
  std::size_t rank = 0;
  const std::size_t cols = m.empty() ? 0 : m[0].size();
  for (std::size_t c = 0; c < cols && rank < m.size(); ++c) {
    std::size_t pivot = rank;
    while (pivot < m.size() && m[pivot][c] % p == 0) ++pivot;
    if (pivot == m.size()) continue;
    std::swap(m[rank], m[pivot]);
    const Symbol inv = pow_mod(m[rank][c], std::uint64_t(p - 2), p);
    for (auto& x : m[rank]) x = x * inv % p;
    for (std::size_t r = 0; r < m.size(); ++r) {
      if (r == rank || m[r][c] == 0) continue;
      const Symbol f = m[r][c];
      for (std::size_t k = 0; k < cols; ++k) m[r][k] = ((m[r][k] - f * m[rank][k]) % p + p) % p;
    }
    ++rank;
  }
  return rank;
}

Word random_word(std::mt19937_64& rng, std::size_t n, Symbol p) {
  Word w(n);
  for (auto& x : w) x = Symbol(rng() % std::uint64_t(p));
  return w;
}

std::vector<std::uint8_t> bytes_of(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(std::uint8_t(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

}  // namespace

TEST_CASE("lee weight and distance") {
  CHECK(lee_weight(Symbol(0), 7) == 0);
  CHECK(lee_weight(Symbol(5), 7) == 2);
  const Word u{1, 5, 3};
  const Word zero{0, 0, 0};
  CHECK(lee_distance(u, zero, 7) == 6);
  CHECK_THROWS_AS(lee_distance(u, Word{0, 0}, 7), std::invalid_argument);

  std::mt19937_64 rng(7);
  for (Symbol p : {5, 7, 11, 29}) {
    for (Symbol x = -3 * p; x <= 3 * p; ++x) CHECK(lee_weight(x, p) == oracle::lee(mod(x, p), p));
  }
  // Metric axioms on random triples.
  for (int t = 0; t < 2000; ++t) {
    const Symbol p = 29;
    const auto a = random_word(rng, 6, p);
    const auto b = random_word(rng, 6, p);
    const auto c = random_word(rng, 6, p);
    CHECK(lee_distance(a, a, p) == 0);
    CHECK(lee_distance(a, b, p) == lee_distance(b, a, p));
    CHECK(lee_distance(a, c, p) <= lee_distance(a, b, p) + lee_distance(b, c, p));
    if (a != b) CHECK(lee_distance(a, b, p) > 0);
  }
}

TEST_CASE("field helpers") {
  CHECK(is_prime(29));
  CHECK_FALSE(is_prime(1));
  CHECK_FALSE(is_prime(91));
  for (Symbol a = 1; a < 29; ++a) CHECK(a * inv_mod(a, 29) % 29 == 1);
  CHECK(signed_rep(6, 7) == -1);
  CHECK(signed_rep(3, 7) == 3);
  // (x - 2)^2 (x - 3) over Z_7
  const Poly f = poly_mul(poly_mul({5, 1}, {5, 1}, 7), {4, 1}, 7);
  CHECK(root_multiplicity(f, 2, 7) == 2);
  CHECK(root_multiplicity(f, 3, 7) == 1);
  CHECK(root_multiplicity(f, 4, 7) == 0);
  const auto [q, r] = poly_divmod(f, {5, 1}, 7);
  CHECK(r.empty());
  CHECK(poly_mul(q, {5, 1}, 7) == f);
}

TEST_CASE("GRS code over (4,2,5) matches the hand-derived matrices") {
  const auto code = GrsCode::build(4, 2, 5);
  CHECK(code.multipliers() == Word{4, 3, 2, 1});
  CHECK(code.generator() == std::vector<Word>{{4, 3, 2, 1}, {4, 1, 1, 4}});
  // H rows are alpha^m with alpha_i = i.
  CHECK(code.parity_check() == std::vector<Word>{{1, 1, 1, 1}, {1, 2, 3, 4}});
  CHECK(code.encode(Word{1, 0}) == Word{4, 3, 2, 1});
  CHECK(code.encode(Word{0, 0}) == Word{0, 0, 0, 0});
  CHECK(code.log2_size() == doctest::Approx(2 * std::log2(5.0)));

  // Exhaustive minimum Lee weight over the 24 nonzero codewords.
  Symbol min_weight = 1000;
  for (const auto& c : code.codewords()) {
    const Symbol w = lee_weight(c, 5);
    if (w > 0) min_weight = std::min(min_weight, w);
  }
  CHECK(min_weight == 4);
}

TEST_CASE("generator is a full-rank basis orthogonal to the parity checks") {
  for (auto [n, l, p] : std::vector<std::array<Symbol, 3>>{
           {4, 2, 5}, {6, 3, 7}, {6, 2, 11}, {13, 10, 29}, {13, 6, 29}, {7, 4, 7}, {16, 5, 37}}) {
    CAPTURE(n);
    CAPTURE(l);
    CAPTURE(p);
    const auto code = GrsCode::build(std::size_t(n), std::size_t(l), p);
    const auto& g = code.generator();
    const auto& h = code.parity_check();
    REQUIRE(g.size() == std::size_t(l));
    REQUIRE(h.size() == std::size_t(n - l));
    for (const auto& gr : g) {
      for (const auto& hr : h) {
        Symbol dot = 0;
        for (std::size_t i = 0; i < gr.size(); ++i) dot = (dot + gr[i] * hr[i]) % p;
        CHECK(dot == 0);
      }
    }
    CHECK(rank_mod_p(g, p) == std::size_t(l));
  }
}

TEST_CASE("code parameters are validated") {
  CHECK_THROWS_AS(GrsCode::build(4, 2, 4), Error);
  CHECK_THROWS_AS(GrsCode::build(4, 2, 2), Error);
  CHECK_THROWS_AS(GrsCode::build(6, 2, 5), Error);
  CHECK_THROWS_AS(GrsCode::build(4, 4, 5), Error);
  CHECK_THROWS_AS(GrsCode::build(4, 0, 5), Error);
  const auto code = GrsCode::build(4, 2, 5);
  CHECK_THROWS(code.encode(Word{1, 2, 3}));
  CHECK_THROWS(code.decode(Word{1, 2, 3}));
}

TEST_CASE("encoding is linear") {
  const auto code = GrsCode::build(13, 6, 29);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_word(rng, 6, 29);
    const auto b = random_word(rng, 6, 29);
    CHECK(add(code.encode(a), code.encode(b), 29) == code.encode(add(a, b, 29)));
    CHECK(code.is_codeword(code.encode(a)));
  }
}

TEST_CASE("decoding the (4,2,5) examples") {
  const auto code = GrsCode::build(4, 2, 5);
  const Word c{4, 3, 2, 1};
  CHECK(code.decode(c) == c);
  CHECK(code.decode(Word{0, 3, 2, 1}) == c);

  // Words at distance >= 2 from every codeword must fail on both decoders.
  const auto all = code.codewords();
  std::size_t far_words = 0;
  for (std::uint64_t k = 0; k < 625; ++k) {
    Word y{Symbol(k % 5), Symbol(k / 5 % 5), Symbol(k / 25 % 5), Symbol(k / 125)};
    Symbol best = 1000;
    for (const auto& w : all) best = std::min(best, lee_distance(y, w, 5));
    if (best >= 2) {
      ++far_words;
      CHECK_FALSE(code.decode(y).has_value());
      CHECK_FALSE(code.decode_brute_force(y).has_value());
    }
  }
  CHECK(far_words > 0);
}

TEST_CASE("every error below the radius is corrected on (4,2,5) and (6,3,7)") {
  for (auto [n, l, p] : std::vector<std::array<Symbol, 3>>{{4, 2, 5}, {6, 3, 7}}) {
    const auto code = GrsCode::build(std::size_t(n), std::size_t(l), p);
    std::vector<Word> errors;
    for (Symbol w = 0; w < n - l; ++w) oracle::errors_of_weight(std::size_t(n), p, w, errors);
    for (const auto& c : code.codewords()) {
      for (const auto& e : errors) {
        const auto got = code.decode(add(c, e, p));
        REQUIRE(got.has_value());
        CHECK(*got == c);
      }
    }
  }
}

TEST_CASE("efficient decoder agrees with brute force, including n = p") {
  std::mt19937_64 rng(11);
  for (auto [n, l, p] : std::vector<std::array<Symbol, 3>>{
           {4, 2, 5}, {5, 3, 5}, {6, 3, 7}, {7, 4, 7}, {6, 2, 11}}) {
    const auto code = GrsCode::build(std::size_t(n), std::size_t(l), p);
    for (int t = 0; t < 1500; ++t) {
      // Half near a codeword, half uniform.
      Word y = random_word(rng, std::size_t(n), p);
      if (t % 2 == 0) {
        std::vector<Word> e;
        oracle::errors_of_weight(std::size_t(n), p, Symbol(rng() % std::uint64_t(n - l + 1)), e);
        y = add(code.encode(random_word(rng, std::size_t(l), p)), e[rng() % e.size()], p);
      }
      const auto fast = code.decode(y);
      const auto slow = code.decode_brute_force(y);
      REQUIRE(fast.has_value() == slow.has_value());
      if (fast) {
        CHECK(*fast == *slow);
        CHECK(code.is_codeword(*fast));
      }
    }
  }
}

TEST_CASE("discretisation") {
  CHECK(ds(55.0, 0.0, 100.0, 10) == 5);
  CHECK(ds(-1.0, 0.0, 100.0, 10) == 0);
  CHECK(ds(101.0, 0.0, 100.0, 10) == 10);
  CHECK(ds(100.0, 0.0, 100.0, 10) == 10);

  const std::vector<double> same{2.0, 2.0, 2.0};
  CHECK(assign_d_range(same, 23) == std::vector<Symbol>{22, 22, 22});
  const std::vector<double> two{1.0, 3.0};
  CHECK(assign_d_range(two, 23) == std::vector<Symbol>{22, 11});

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> s(7);
    for (auto& x : s) x = u(rng);
    const auto d = assign_d_range(s, 29);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(d[i] >= 14);
      CHECK(d[i] <= 28);
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[i] < s[j]) CHECK(d[i] >= d[j]);
      }
    }
  }

  const std::vector<double> v{1, 2, 3, 4, kInvalid};
  CHECK(percentile(v, 0.5) == doctest::Approx(2.5));
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);
}

TEST_CASE("fitted discretisation") {
  FeatureMatrixBuilder b({"f", "flat"});
  for (int k = 0; k < 50; ++k) {
    const double a[2] = {double(k), 3.0};
    b.add(k < 25 ? "a" : "b", "s", k, a);
  }
  const auto m = std::move(b).build();
  const auto spec = fit_discretization(m, 23, {0.0, 1.0});
  CHECK(spec.min[0] == 0.0);
  CHECK(spec.max[0] == 49.0);
  // A constant feature is widened around its value.
  CHECK(spec.min[1] == 2.0);
  CHECK(spec.max[1] == 4.0);
  CHECK(spec.fill[0] == doctest::Approx(24.5));
  const double row[2] = {kInvalid, 3.0};
  const auto w = discretize(spec, row);
  CHECK(w[0] == ds(24.5, 0.0, 49.0, spec.d_range[0]));
}

TEST_CASE("PRF matches reference HMAC-SHA-256 vectors") {
  std::ifstream in(std::string(HMOG_FIXTURES) + "/prf_vectors.txt");
  REQUIRE(in);
  std::string line;
  int cases = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string part;
    while (std::getline(ss, part, ';')) parts.push_back(part);
    if (parts.size() == 3) parts.insert(parts.begin() + 1, "");
    REQUIRE(parts.size() == 4);
    Word c;
    std::istringstream cs(parts[0]);
    for (Symbol x; cs >> x;) c.push_back(x);
    CHECK(to_hex(prf(c, parts[1], kKeyDomain)) == parts[2]);
    CHECK(to_hex(prf(c, parts[1], kTagDomain)) == parts[3]);
    const auto back = digest_from_hex(parts[3]);
    REQUIRE(back.has_value());
    CHECK(std::vector<std::uint8_t>(back->begin(), back->end()) == bytes_of(parts[3]));
    ++cases;
  }
  CHECK(cases == 4);
  CHECK_FALSE(digest_from_hex("abc").has_value());
  CHECK_FALSE(digest_from_hex(std::string(64, 'g')).has_value());
}

TEST_CASE("commit and open") {
  const auto code = GrsCode::build(13, 9, 29);
  std::mt19937_64 data_rng(17);
  const auto x = random_word(data_rng, 13, 29);

  std::mt19937_64 r1(42);
  std::mt19937_64 r2(42);
  const auto a = commit(x, "pw", code, r1);
  const auto b = commit(x, "pw", code, r2);
  CHECK(a.commitment == b.commitment);
  CHECK(a.key == b.key);

  // delta + c = x: recover c from the key path by opening with x itself.
  const auto opened = open(x, a.commitment, "pw", code);
  REQUIRE(opened.has_value());
  CHECK(*opened == a.key);
  const Word c = sub(x, a.commitment.delta, 29);
  CHECK(code.is_codeword(c));
  CHECK(prf(c, "pw", kKeyDomain) == a.key);
  CHECK(prf(c, "pw", kTagDomain) == a.commitment.tag);

  // Every weight-1 perturbation opens; wrong password never does.
  for (std::size_t i = 0; i < 13; ++i) {
    for (Symbol s : {Symbol(1), Symbol(28)}) {
      Word y = x;
      y[i] = mod(y[i] + s, 29);
      CHECK(open(y, a.commitment, "pw", code) == a.key);
    }
  }
  CHECK_FALSE(open(x, a.commitment, "pX", code).has_value());

  // Any single tag bit flip fails.
  for (std::size_t bit = 0; bit < 256; ++bit) {
    auto tampered = a.commitment;
    tampered.tag[bit / 8] ^= std::uint8_t(1u << (bit % 8));
    CHECK_FALSE(open(x, tampered, "pw", code).has_value());
  }

  // Fresh randomness gives distinct tags.
  std::set<Digest> tags;
  std::mt19937_64 r3(99);
  for (int t = 0; t < 1000; ++t) tags.insert(commit(x, "pw", code, r3).commitment.tag);
  CHECK(tags.size() == 1000);
}

TEST_CASE("uniform_below stays in range and hits every value") {
  std::mt19937_64 rng(1);
  std::vector<int> seen(29, 0);
  for (int t = 0; t < 5000; ++t) {
    const Symbol v = uniform_below(rng, 29);
    REQUIRE(v >= 0);
    REQUIRE(v < 29);
    ++seen[std::size_t(v)];
  }
  for (int s : seen) CHECK(s > 0);
}

TEST_CASE("commitment records round trip") {
  const auto code = GrsCode::build(4, 2, 5);
  std::mt19937_64 rng(8);
  std::vector<Commitment> list;
  for (int u = 0; u < 3; ++u) {
    auto c = commit(Word{1, 2, 3, 4}, "z", code, rng).commitment;
    c.user_id = "u" + std::to_string(u);
    c.spec = {5, {0.5, -1.25, 3, 4}, {10, 2.5, 7, 8}, {4, 3, 2, 4}, {1.5, 0, 5, 6}};
    list.push_back(c);
  }
  std::stringstream ss;
  ss << "# banner\n";
  write_commitments(ss, list);
  CHECK(read_commitments(ss) == list);

  std::istringstream bad("hmog-commitment 1\nuser u\np 5\n");
  CHECK_THROWS_AS(read_commitments(bad), Error);
}

TEST_CASE("guessing distance") {
  // Target 0 is opened only by user 8; users 1..7 each open user 9's
  // commitment, so they outrank 8 only by index and user 8 is the 8th try.
  std::vector<std::vector<bool>> opens(10, std::vector<bool>(10, false));
  for (int j = 1; j <= 7; ++j) opens[std::size_t(j)][9] = true;
  opens[8][0] = true;
  const auto r = guessing_distance(opens);
  REQUIRE(r.attempts[0].has_value());
  CHECK(*r.attempts[0] == 8);
  CHECK(r.attempts[9] == std::optional<std::size_t>(1));
  // Only targets 0 and 9 are guessed: log2(8) = 3 and log2(1) = 0.
  CHECK(r.mean_gd == doctest::Approx(1.5));
  CHECK(r.non_guessed_fraction == doctest::Approx(0.8));

  std::vector<std::vector<bool>> none(3, std::vector<bool>(3, false));
  const auto n = guessing_distance(none);
  CHECK(std::isnan(n.mean_gd));
  CHECK(n.non_guessed_fraction == 1.0);

  std::vector<std::vector<bool>> all(3, std::vector<bool>(3, true));
  const auto a = guessing_distance(all);
  CHECK(a.mean_gd == 0.0);
  CHECK(a.non_guessed_fraction == 0.0);
}
