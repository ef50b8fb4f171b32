#include "hmog/bkg/grs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hmog/error.hpp"

namespace hmog::bkg {

GrsCode GrsCode::build(std::size_t n, std::size_t l, Symbol p) {
  if (p <= 2 || !is_prime(p)) {
    throw config_error("code: p = " + std::to_string(p) + " is not an odd prime");
  }
  if (l == 0 || l >= n || Symbol(n) > p) {
    throw config_error("code: need 0 < l < n <= p, got n = " + std::to_string(n) +
                       ", l = " + std::to_string(l) + ", p = " + std::to_string(p));
  }
  GrsCode code;
  code.n_ = n;
  code.l_ = l;
  code.p_ = p;
  const std::size_t r = n - l;

  code.h_.assign(r, Word(n, 0));
  for (std::size_t m = 0; m < r; ++m) {
    for (std::size_t i = 0; i < n; ++i) code.h_[m][i] = pow_mod(code.locator(i), m, p);
  }
  code.v_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    Symbol prod = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) prod = prod * mod(code.locator(i) - code.locator(j), p) % p;
    }
    code.v_[i] = inv_mod(prod, p);
  }
  code.g_.assign(l, Word(n, 0));
  for (std::size_t row = 0; row < l; ++row) {
    for (std::size_t i = 0; i < n; ++i) {
      code.g_[row][i] = code.v_[i] * pow_mod(code.locator(i), row, p) % p;
    }
  }
  for (const auto& g : code.g_) {
    if (!code.is_codeword(g)) {
      throw std::logic_error("code: generator row violates G H^T = 0");
    }
  }
  return code;
}

double GrsCode::log2_size() const { return double(l_) * std::log2(double(p_)); }

void GrsCode::check_length(std::span<const Symbol> y) const {
  if (y.size() != n_) {
    throw std::invalid_argument("code: word of length " + std::to_string(y.size()) +
                                ", expected " + std::to_string(n_));
  }
}

Word GrsCode::encode(std::span<const Symbol> message) const {
  if (message.size() != l_) {
    throw std::invalid_argument("encode: message of length " + std::to_string(message.size()) +
                                ", expected " + std::to_string(l_));
  }
  Word c(n_, 0);
  for (std::size_t row = 0; row < l_; ++row) {
    const Symbol m = mod(message[row], p_);
    for (std::size_t i = 0; i < n_; ++i) c[i] = (c[i] + m * g_[row][i]) % p_;
  }
  return c;
}

Word GrsCode::syndrome(std::span<const Symbol> y) const {
  check_length(y);
  Word s(h_.size(), 0);
  for (std::size_t m = 0; m < h_.size(); ++m) {
    for (std::size_t i = 0; i < n_; ++i) s[m] = (s[m] + h_[m][i] * mod(y[i], p_)) % p_;
  }
  return s;
}

bool GrsCode::is_codeword(std::span<const Symbol> y) const {
  for (Symbol s : syndrome(y)) {
    if (s != 0) return false;
  }
  return true;
}

std::optional<Word> GrsCode::decode(std::span<const Symbol> y) const {
  check_length(y);
  Word received(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) received[i] = mod(y[i], p_);
  if (is_codeword(received)) return received;

  const auto radius = Symbol(redundancy()) - 1;
  // With n = p the last locator is 0 and its error is invisible to the
  // locator polynomials, so each possible error value there is tried in turn.
  const bool zero_locator = locator(n_ - 1) == 0;
  const Symbol max_shift = zero_locator ? radius : 0;
  for (Symbol k = 0; k <= 2 * max_shift; ++k) {
    const Symbol shift = (k % 2 == 1) ? (k + 1) / 2 : -(k / 2);
    Word candidate = received;
    candidate[n_ - 1] = mod(candidate[n_ - 1] - shift, p_);
    auto c = decode_located(candidate);
    if (c && lee_distance(received, *c, p_) <= radius) return c;
  }
  return std::nullopt;
}

std::optional<Word> GrsCode::decode_located(std::span<const Symbol> y) const {
  const std::size_t r = redundancy();
  const auto radius = Symbol(r) - 1;
  const Word s = syndrome(y);
  if (std::all_of(s.begin(), s.end(), [](Symbol v) { return v == 0; })) {
    return Word(y.begin(), y.end());
  }

  // Power series of Lambda / V modulo x^r from s_1 .. s_{r-1}:
  // (k + 1) sigma_{k+1} = -sum_{i <= k} sigma_i s_{k+1-i}.
  Poly sigma(r, 0);
  sigma[0] = 1;
  for (std::size_t k = 0; k + 1 < r; ++k) {
    Symbol acc = 0;
    for (std::size_t i = 0; i <= k; ++i) acc = (acc + sigma[i] * s[k + 1 - i]) % p_;
    sigma[k + 1] = mod(-acc * inv_mod(Symbol(k + 1), p_), p_);
  }
  trim(sigma);

  Poly x_r(r + 1, 0);
  x_r[r] = 1;

  // s_0 is the signed excess of positive over negative error mass, and equals
  // deg Lambda - deg V.
  for (Symbol eta = -radius; eta <= radius; ++eta) {
    if (mod(eta, p_) != s[0]) continue;

    Poly r_prev = x_r;
    Poly t_prev;
    Poly r_cur = sigma;
    Poly t_cur{1};
    while (degree(r_cur) >= 0) {
      const int diff = degree(r_cur) - degree(t_cur);
      if (diff <= eta) break;
      auto [q, rem] = poly_divmod(r_prev, r_cur, p_);
      Poly t_next = poly_sub(t_prev, poly_mul(q, t_cur, p_), p_);
      r_prev = std::move(r_cur);
      t_prev = std::move(t_cur);
      r_cur = std::move(rem);
      t_cur = std::move(t_next);
    }
    if (degree(r_cur) < 0 || degree(r_cur) - degree(t_cur) != eta) continue;
    if (t_cur.empty() || t_cur[0] == 0) continue;

    const Symbol norm = inv_mod(t_cur[0], p_);
    const Poly lambda = poly_scale(r_cur, norm, p_);
    const Poly v = poly_scale(t_cur, norm, p_);
    if (Symbol(degree(lambda) + degree(v)) > radius) continue;

    Word error(n_, 0);
    int found_lambda = 0;
    int found_v = 0;
    bool clash = false;
    for (std::size_t i = 0; i < n_ && !clash; ++i) {
      if (locator(i) == 0) continue;
      const Symbol root = inv_mod(locator(i), p_);
      const int plus = root_multiplicity(lambda, root, p_);
      const int minus = root_multiplicity(v, root, p_);
      clash = plus > 0 && minus > 0;
      error[i] = mod(Symbol(plus - minus), p_);
      found_lambda += plus;
      found_v += minus;
    }
    if (clash || found_lambda != degree(lambda) || found_v != degree(v)) continue;

    Word c = sub(y, error, p_);
    if (is_codeword(c) && lee_weight(error, p_) <= radius) return c;
  }
  return std::nullopt;
}

std::vector<Word> GrsCode::codewords() const {
  std::vector<Word> out;
  Word m(l_, 0);
  while (true) {
    out.push_back(encode(m));
    std::size_t k = l_;
    while (k > 0 && m[k - 1] == p_ - 1) m[--k] = 0;
    if (k == 0) break;
    ++m[k - 1];
  }
  return out;
}

std::optional<Word> GrsCode::decode_brute_force(std::span<const Symbol> y) const {
  check_length(y);
  const auto radius = Symbol(redundancy()) - 1;
  std::optional<Word> best;
  Symbol best_distance = radius + 1;
  std::size_t ties = 0;
  for (auto& c : codewords()) {
    const Symbol d = lee_distance(y, c, p_);
    if (d < best_distance) {
      best_distance = d;
      best = std::move(c);
      ties = 1;
    } else if (d == best_distance && best) {
      ++ties;
    }
  }
  if (!best || ties > 1) return std::nullopt;
  return best;
}

}  // namespace hmog::bkg
